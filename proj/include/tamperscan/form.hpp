#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamperscan/html.hpp"
#include "tamperscan/url.hpp"

namespace tamperscan {

enum class ControlKind { Text, Hidden, Password, Radio, Checkbox, Select, TextArea };

// Where a request parameter came from. Only HiddenField and QueryString values
// are server-generated and thus token candidates.
enum class ParamSource { UserInput, HiddenField, QueryString, Cookie };

std::string_view to_string(ControlKind kind);
std::string_view to_string(ParamSource source);
ParamSource param_source_from_string(std::string_view text);

struct InputControl {
    std::string name;
    ControlKind kind = ControlKind::Text;
    std::string type_attr;  // raw `type`, lower-case ("number", "date", ...)
    std::string default_value;
    bool checked = false;              // radio / checkbox
    std::vector<std::string> options;  // select option values
    bool required = false;
    std::optional<std::string> pattern;
    std::optional<double> min;
    std::optional<double> max;
    std::optional<std::size_t> maxlength;
    std::string class_attr;
    std::string label;
    std::string id;
    Locator locator;
    bool revealed = false;  // added by a CLV reveal rule, not present in markup

    ParamSource source() const {
        return kind == ControlKind::Hidden ? ParamSource::HiddenField : ParamSource::UserInput;
    }

    bool operator==(const InputControl&) const = default;
};

struct ValidateRule {
    enum class Kind { Pattern, Range, Required, Equals };

    std::string field;
    Kind kind = Kind::Required;
    std::string pattern;
    double min = 0;
    double max = 0;
    std::string equals;

    bool operator==(const ValidateRule&) const = default;
};

struct TransformRule {
    enum class Fn { Concat, Base64Concat };

    std::string target;
    Fn fn = Fn::Concat;
    std::vector<std::string> inputs;
    std::string sep;

    bool operator==(const TransformRule&) const = default;
};

struct RevealRule {
    std::string when_field;
    std::string when_equals;
    std::vector<InputControl> add;

    bool operator==(const RevealRule&) const = default;
};

// The declarative stand-in for page scripts, read from a form's `data-clv` attribute.
struct ClvDescriptor {
    std::vector<ValidateRule> validate;
    std::vector<TransformRule> transform;
    std::vector<RevealRule> reveal;
    bool ajax = false;

    // Throws ConfigError on grammar violations.
    static ClvDescriptor parse(std::string_view json_text);

    bool operator==(const ClvDescriptor&) const = default;
};

struct SubmitButton {
    Locator locator;  // `#id` when the button has one, else its child path
    std::string id;
    std::string value;

    bool operator==(const SubmitButton&) const = default;
};

enum class SubmissionMode { PageLoad, Ajax };

struct Form {
    std::size_t index = 0;  // ordinal among the page's forms
    std::string action;     // raw attribute; resolved at submission time
    std::string method = "get";
    SubmissionMode mode = SubmissionMode::PageLoad;
    std::vector<InputControl> controls;
    std::vector<SubmitButton> buttons;
    std::optional<ClvDescriptor> clv;
    std::string id;

    const InputControl* control(std::string_view name) const;
    bool operator==(const Form&) const = default;
};

// Ordered name -> value. A missing radio/checkbox name means "not selected".
using FieldValues = std::map<std::string, std::string>;

std::vector<Form> extract_forms(const Document& doc);
// The form owning a submit control, located by id or path.
std::optional<std::size_t> form_of_button(const std::vector<Form>& forms, const Locator& button);
// Resolves `#id` or `form[i]/name=...` to (form index, control name), reveal specs included.
std::optional<std::pair<std::size_t, std::string>> resolve_control(const Document& doc,
                                                                  const std::vector<Form>& forms,
                                                                  const Locator& locator);

FieldValues default_values(const Form& form);

struct Param {
    std::string name;
    std::string value;
    ParamSource source = ParamSource::UserInput;
    Locator locator;

    bool operator==(const Param&) const = default;
};

std::vector<Param> extract_params(const Form& form, const Url& page_url);

struct Violation {
    std::string field;
    std::string constraint;  // required, pattern, option, type, min, max, maxlength, range, equals

    bool operator==(const Violation&) const = default;
};

struct Verdict {
    std::vector<Violation> violations;

    bool accepted() const { return violations.empty(); }
    bool operator==(const Verdict&) const = default;
};

// Reveal rules only: the form with any triggered controls appended.
Form apply_reveal(const Form& form, const FieldValues& values);
// Transforms only. Throws ConfigError when a transform input is not a control.
FieldValues apply_preprocessing(const Form& form, FieldValues values);

struct Prepared {
    Form form;  // with revealed controls
    FieldValues values;
    Verdict verdict;
    std::vector<std::string> revealed;  // names of controls added by reveal rules
};

// reveal -> transforms -> validations.
Prepared prepare_submission(const Form& form, FieldValues values);
Verdict validate_client_side(const Form& form, const FieldValues& values);

std::string base64_encode(std::string_view bytes);

}  // namespace tamperscan
