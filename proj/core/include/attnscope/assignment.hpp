// Copyright 2026 The attnscope Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

#include "attnscope/matrix.hpp"

namespace attnscope {

// Maximum-weight perfect matching on a square weight matrix (Hungarian
// algorithm, O(n^3) per solve). Returns col[row]. Among all optimal
// matchings the lexicographically smallest col vector is returned; totals
// within `tie_tolerance` of the optimum count as optimal.
std::vector<std::size_t> max_weight_assignment(const Matrix& weights, double tie_tolerance = 1e-9);

// Total weight of a matching returned above.
double assignment_weight(const Matrix& weights, const std::vector<std::size_t>& col_of_row);

}  // namespace attnscope
