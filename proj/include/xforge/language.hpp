#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace xforge {

enum class ResourceTier { high, medium, low };

/// ISO 639-1 code of one of the supported languages. Construction validates.
class LanguageCode {
public:
    LanguageCode() = default;
    explicit LanguageCode(std::string_view code);

    static std::optional<LanguageCode> parse(std::string_view code);

    const std::string& code() const { return code_; }
    ResourceTier tier() const;
    bool is_english() const { return code_ == "en"; }
    /// Scripts written right to left (only ur among the supported set).
    bool right_to_left() const { return code_ == "ur"; }

    friend bool operator==(const LanguageCode&, const LanguageCode&) = default;
    friend auto operator<=>(const LanguageCode&, const LanguageCode&) = default;

private:
    std::string code_ = "en";
};

inline constexpr std::array<std::string_view, 11> kSupportedLanguages = {
    "bn", "en", "fi", "hi", "id", "ta", "th", "tr", "vi", "sw", "ur"};

std::string_view to_string(ResourceTier tier);

/// English name of the language, e.g. "Urdu" for ur.
std::string_view english_name(const LanguageCode& lang);

void to_json(nlohmann::json& j, const LanguageCode& l);
void from_json(const nlohmann::json& j, LanguageCode& l);

}  // namespace xforge
