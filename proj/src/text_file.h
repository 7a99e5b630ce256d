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

#ifndef PUELAB_SRC_TEXT_FILE_H_
#define PUELAB_SRC_TEXT_FILE_H_

#include <string>

namespace puelab::internal {

// Writes `text` to a sibling temporary and renames it over `path`. Throws
// IoError on failure.
void write_text_atomic(const std::string& path, const std::string& text);

// Whole file contents. Throws IoError when unreadable.
std::string read_text(const std::string& path);

}  // namespace puelab::internal

#endif  // PUELAB_SRC_TEXT_FILE_H_
