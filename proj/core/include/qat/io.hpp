// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace qat {

/// Whole-file read; throws qat::Error naming the path when it can't open.
std::string read_file(const std::filesystem::path& path);

/// Writes to "<path>.tmp" then renames over `path`, so readers never see a
/// partial file. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace qat
