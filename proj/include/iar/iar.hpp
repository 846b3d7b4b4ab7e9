#pragma once

// Everything except the FRED client, which pulls in httplib and OpenSSL.

#include "iar/backtest.hpp"
#include "iar/bandwidth.hpp"
#include "iar/cube_io.hpp"
#include "iar/dataprep.hpp"
#include "iar/error.hpp"
#include "iar/estimators.hpp"
#include "iar/evaluation.hpp"
#include "iar/inference.hpp"
#include "iar/kernel.hpp"
#include "iar/parallel.hpp"
#include "iar/qr_solver.hpp"
#include "iar/synthetic.hpp"
#include "iar/version.hpp"
