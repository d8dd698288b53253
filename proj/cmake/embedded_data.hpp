#pragma once

#include <string_view>

namespace fisco::data {

extern const std::string_view kNamePools;
extern const std::string_view kTemplates;
extern const std::string_view kClaimBanks;

}  // namespace fisco::data
