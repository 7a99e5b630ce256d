// Copyright 2026 The PueLab Authors
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

#ifndef PUELAB_ERROR_H_
#define PUELAB_ERROR_H_

#include <stdexcept>
#include <string>

namespace puelab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, malformed pattern set or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Byte sequence that is not valid UTF-8, or a token id outside the vocabulary.
class DecodeError : public Error {
 public:
  using Error::Error;
};

// Unreadable, truncated or inconsistent checkpoint file.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure while reading or writing run artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

// An internal cross-check (e.g. the loss decomposition identity) failed.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace puelab

#endif  // PUELAB_ERROR_H_
