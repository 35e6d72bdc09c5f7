#ifndef CLPOSE_CLPOSE_HPP
#define CLPOSE_CLPOSE_HPP

#include "clpose/codec.hpp"
#include "clpose/core.hpp"
#include "clpose/io.hpp"
#include "clpose/loss.hpp"
#include "clpose/metrics.hpp"
#include "clpose/synthfit.hpp"

#endif  // CLPOSE_CLPOSE_HPP
