// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "densreach/distribution.hpp"
#include "densreach/geometry.hpp"

namespace densreach::cli {

/// Bad command-line input; maps to exit code 2.
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Comma-separated linear constraints over named state variables, e.g.
/// "x>=-0.5, x<=0, y - 2*x <= 1". Variables are the given names or x1..xn.
/// Strict inequalities are read as non-strict; "=" gives two rows.
Polyhedron parse_set(const std::string& text, const std::vector<std::string>& names);

/// "lo,hi;lo,hi;..." one interval per coordinate.
HyperRectangle parse_box(const std::string& text);

/// "uniform" or "gauss:mu=[a,b,...],sigma=s" (sigma may also be a list);
/// both on `support`.
InitialDistribution parse_rho0(const std::string& text, const HyperRectangle& support);

std::vector<double> parse_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Edit distance, used for flag suggestions.
std::size_t levenshtein(const std::string& a, const std::string& b);

}  // namespace densreach::cli
