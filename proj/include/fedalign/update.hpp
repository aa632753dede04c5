//
// Copyright 2026 The fedalign Authors
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
//

#ifndef FEDALIGN_UPDATE_HPP_
#define FEDALIGN_UPDATE_HPP_

#include <cstddef>
#include <string>

#include "fedalign/model.hpp"

namespace fedalign {

// Who produced an update. Only kBackdoor updates skip client-side DP noise.
enum class UpdateOrigin { kBenign, kAligned, kBackdoor };

std::string to_string(UpdateOrigin origin);

// One client's contribution to a round: the model delta plus its sample
// count, which is the FedAvg weight.
struct ClientUpdate {
  ParamVector delta;
  std::size_t n_k = 0;
  int client_id = -1;
  UpdateOrigin origin = UpdateOrigin::kBenign;
  bool noise_applied = false;
};

}  // namespace fedalign

#endif  // FEDALIGN_UPDATE_HPP_
