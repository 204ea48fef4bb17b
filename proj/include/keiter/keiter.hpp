#pragma once

// Umbrella header: the whole library.

#include "keiter/verify.hpp"
