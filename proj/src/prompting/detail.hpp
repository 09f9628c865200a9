// Copyright 2026 The biasaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "biasaudit/prompting.hpp"

namespace biasaudit::prompting::detail {

std::string first_user_text(const PromptPlan& plan);
// Rewrites the first user turn from the plan's pieces.
void rebuild_first_user(PromptPlan& plan);

}  // namespace biasaudit::prompting::detail
