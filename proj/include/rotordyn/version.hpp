#pragma once

#define ROTORDYN_VERSION "0.1.0"
