// Copyright 2026 The paostruct Authors.
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

#ifndef PAOSTRUCT_IO_HPP_
#define PAOSTRUCT_IO_HPP_

#include <filesystem>
#include <string>
#include <string_view>

namespace paostruct::io {

// Whole-file read; throws Error(kNotFound) when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, flushes, then renames over `path`, so
// readers never observe a truncated document.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Writes every byte to a pipe or socket. A closed peer raises
// Error(kConnectionError) instead of SIGPIPE; the calling thread's signal
// mask is restored before returning.
void write_all(int fd, std::string_view bytes);

}  // namespace paostruct::io

#endif  // PAOSTRUCT_IO_HPP_
