#include "xforge/templates.hpp"

#include "xforge/text.hpp"

namespace xforge::templates {

std::string with_language(std::string_view tmpl, const LanguageCode& lang) {
    return text::render(tmpl, {{"language", std::string(english_name(lang))}});
}

}  // namespace xforge::templates
