// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>

namespace biasaudit::embedded {

// Contents of a file shipped under data/, compiled into the library.
std::optional<std::string_view> file(std::string_view name);

}  // namespace biasaudit::embedded
