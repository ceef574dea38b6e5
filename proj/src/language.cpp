#include "xforge/language.hpp"

#include <algorithm>
#include <utility>

namespace xforge {

LanguageCode::LanguageCode(std::string_view code) {
    if (std::find(kSupportedLanguages.begin(), kSupportedLanguages.end(), code) ==
        kSupportedLanguages.end())
        throw std::invalid_argument("unsupported language code '" + std::string(code) + "'");
    code_ = std::string(code);
}

std::optional<LanguageCode> LanguageCode::parse(std::string_view code) {
    if (std::find(kSupportedLanguages.begin(), kSupportedLanguages.end(), code) ==
        kSupportedLanguages.end())
        return std::nullopt;
    return LanguageCode(code);
}

ResourceTier LanguageCode::tier() const {
    static constexpr std::array<std::string_view, 5> kMedium = {"fi", "id", "th", "tr", "vi"};
    static constexpr std::array<std::string_view, 5> kLow = {"bn", "hi", "sw", "ta", "ur"};
    if (std::find(kMedium.begin(), kMedium.end(), code_) != kMedium.end())
        return ResourceTier::medium;
    if (std::find(kLow.begin(), kLow.end(), code_) != kLow.end()) return ResourceTier::low;
    return ResourceTier::high;
}

std::string_view to_string(ResourceTier tier) {
    switch (tier) {
        case ResourceTier::high: return "high";
        case ResourceTier::medium: return "medium";
        case ResourceTier::low: return "low";
    }
    return "high";
}

std::string_view english_name(const LanguageCode& lang) {
    static constexpr std::array<std::pair<std::string_view, std::string_view>, 11> kNames = {{
        {"bn", "Bengali"},
        {"en", "English"},
        {"fi", "Finnish"},
        {"hi", "Hindi"},
        {"id", "Indonesian"},
        {"ta", "Tamil"},
        {"th", "Thai"},
        {"tr", "Turkish"},
        {"vi", "Vietnamese"},
        {"sw", "Swahili"},
        {"ur", "Urdu"},
    }};
    for (const auto& [code, name] : kNames)
        if (code == lang.code()) return name;
    return lang.code();
}

void to_json(nlohmann::json& j, const LanguageCode& l) { j = l.code(); }

void from_json(const nlohmann::json& j, LanguageCode& l) {
    l = LanguageCode(j.get<std::string>());
}

}  // namespace xforge
