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

#ifndef SUT_PRIVACY_H_
#define SUT_PRIVACY_H_

#include <cmath>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"

namespace sut {

struct PrivacyProfile {
  double eps;
  double delta;
};

// A robust shuffle-privacy curve gamma -> (eps_bar(gamma), delta_bar(gamma))
// of the form eps_bar = const, delta_bar = 4 * delta^gamma, where gamma is
// the fraction of honest users.
class RobustProfile {
 public:
  RobustProfile(double eps_bar, double delta)
      : eps_bar_(eps_bar), delta_(delta) {}

  absl::StatusOr<PrivacyProfile> At(double gamma) const {
    if (!(gamma > 0 && gamma <= 1)) {
      return absl::InvalidArgumentError(
          absl::StrCat("honest fraction gamma must lie in (0, 1], got ",
                       gamma));
    }
    return PrivacyProfile{eps_bar_, 4 * std::pow(delta_, gamma)};
  }

 private:
  double eps_bar_;
  double delta_;
};

}  // namespace sut

#endif  // SUT_PRIVACY_H_
