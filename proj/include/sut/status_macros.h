// Copyright 2026 The Shuffle Uniformity Testing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SUT_STATUS_MACROS_H_
#define SUT_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define SUT_STATUS_CONCAT_INNER_(x, y) x##y
#define SUT_STATUS_CONCAT_(x, y) SUT_STATUS_CONCAT_INNER_(x, y)

// Returns early from the enclosing function if `expr` is not OK.
#define SUT_RETURN_IF_ERROR(expr)                \
  do {                                           \
    const absl::Status sut_status_ = (expr);     \
    if (!sut_status_.ok()) return sut_status_;   \
  } while (0)

// Evaluates a StatusOr expression, returning its status on error and
// otherwise moving the value into `lhs`.
#define SUT_ASSIGN_OR_RETURN(lhs, rexpr)                                    \
  SUT_ASSIGN_OR_RETURN_IMPL_(SUT_STATUS_CONCAT_(sut_statusor_, __LINE__), \
                             lhs, rexpr)

#define SUT_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                               \
  if (!statusor.ok()) return statusor.status();          \
  lhs = std::move(statusor).value()

#endif  // SUT_STATUS_MACROS_H_
