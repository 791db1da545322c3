// Copyright 2026 The rvoskit Authors. All Rights Reserved.
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

#ifndef RVOS_ERROR_HPP_
#define RVOS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rvos {

// Validation errors come from bad inputs (files, shapes, arguments); runtime
// errors come from backends or the filesystem while work is underway.
enum class ErrorKind { validation, runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Same kind, message prefixed with `context: `.
  Error with_context(const std::string& context) const {
    return Error(kind_, context + ": " + what());
  }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::validation, what);
}

inline Error runtime_error(const std::string& what) {
  return Error(ErrorKind::runtime, what);
}

}  // namespace rvos

#endif  // RVOS_ERROR_HPP_
