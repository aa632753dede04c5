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

#ifndef FEDALIGN_ERRORS_HPP_
#define FEDALIGN_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedalign {

// Invalid shapes, ranges or experiment settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during training or aggregation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. non-consecutive round logs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. Carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) +
                           ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// A per-class quantity was requested for a class with no samples.
class EmptyClassError : public std::runtime_error {
 public:
  explicit EmptyClassError(int label)
      : std::runtime_error("no samples of class " + std::to_string(label)),
        label_(label) {}

  int label() const { return label_; }

 private:
  int label_;
};

// The auxiliary dataset could not be built for the named class.
class ConstructionError : public std::runtime_error {
 public:
  ConstructionError(const std::string& what, int label)
      : std::runtime_error(what), label_(label) {}

  int label() const { return label_; }

 private:
  int label_;
};

// A metric is undefined on the given input (e.g. no non-target samples).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedalign

#endif  // FEDALIGN_ERRORS_HPP_
