#pragma once

#include <cstdint>
#include <string_view>

namespace conse {

using LabelId = std::int64_t;

enum class Split { Train, Test };

std::string_view to_string(Split split) noexcept;

}  // namespace conse
