#pragma once

#include <doctest.h>

#include "trex/error.hpp"

// Checks that `expr` throws trex::Error carrying `errc`.
#define CHECK_THROWS_CODE(expr, errc)                        \
  do {                                                       \
    bool thrown_ = false;                                    \
    try {                                                    \
      (void)(expr);                                          \
    } catch (const trex::Error& e_) {                        \
      thrown_ = true;                                        \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());         \
    }                                                        \
    CHECK_MESSAGE(thrown_, "expected trex::Error: " #errc);  \
  } while (0)
