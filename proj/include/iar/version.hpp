#pragma once

#define IAR_VERSION "0.1.0"
