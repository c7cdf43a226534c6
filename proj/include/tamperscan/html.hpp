#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tamperscan {

// Reference to a node: `#id`, `form[i]/name=NAME`, `path:0/2/1` (child indices
// from the document root) or `$.a.b[0]` for JSON leaves.
struct Locator {
    enum class Kind { Id, FormControl, Path, JsonPath };

    Kind kind = Kind::Path;
    std::string id;                 // Id
    std::size_t form_index = 0;     // FormControl
    std::string name;               // FormControl
    std::vector<std::size_t> path;  // Path
    std::string json_path;          // JsonPath

    static Locator parse(std::string_view text);
    static Locator element_id(std::string id);
    static Locator form_control(std::size_t form_index, std::string name);
    static Locator child_path(std::vector<std::size_t> indices);
    static Locator json(std::string path);

    std::string to_string() const;

    bool operator==(const Locator&) const = default;
};

struct Node {
    enum class Kind { Root, Element, Text };

    Kind kind = Kind::Element;
    std::string name;  // lower-case tag name; empty for text
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string text;  // Text nodes only, entities decoded
    std::size_t parent = 0;
    std::vector<std::size_t> children;

    const std::string* attribute(std::string_view key) const;
    bool has_attribute(std::string_view key) const { return attribute(key) != nullptr; }
};

struct LeafText {
    Locator where;
    std::string text;

    bool operator==(const LeafText&) const = default;
};

// Immutable node tree from a tolerant HTML parse. Node 0 is the document root.
class Document {
public:
    static Document parse(std::string_view html);

    const Node& node(std::size_t index) const { return nodes_.at(index); }
    std::size_t size() const { return nodes_.size(); }
    static constexpr std::size_t root() { return 0; }

    std::optional<std::size_t> element_by_id(std::string_view id) const;
    std::optional<std::size_t> at_path(std::span<const std::size_t> path) const;
    std::vector<std::size_t> path_of(std::size_t index) const;
    // Slash-separated tag names, e.g. "p/b/#text".
    std::string describe(std::size_t index) const;

    // Element indices in document order.
    std::vector<std::size_t> elements_named(std::string_view tag) const;
    // Concatenated descendant text.
    std::string text_content(std::size_t index) const;

    // Every non-blank text node and every input/button/textarea value, once each.
    std::vector<LeafText> leaf_texts() const;

    // Resolves Id and Path locators. FormControl locators go through the form model.
    std::optional<std::size_t> resolve(const Locator& locator) const;

private:
    std::vector<Node> nodes_;
};

std::string decode_entities(std::string_view text);
std::string escape_html(std::string_view text);

// A response body after content-type dispatch.
class ParsedBody {
public:
    enum class Kind { Html, Json, Raw };

    static ParsedBody parse(std::string_view body, std::string_view content_type);

    Kind kind() const;
    const Document* html() const { return std::get_if<Document>(&content_); }
    const nlohmann::json* json() const { return std::get_if<nlohmann::json>(&content_); }
    const std::string& raw() const { return raw_; }

    // Text leaves: HTML leaves, flattened JSON string/number/bool leaves, or the raw body.
    std::vector<LeafText> leaves() const;

private:
    std::variant<Document, nlohmann::json, std::monostate> content_;
    std::string raw_;
};

std::vector<LeafText> json_leaves(const nlohmann::json& value);

}  // namespace tamperscan
