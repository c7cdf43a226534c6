#include "tamperscan/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <unordered_set>

#include "tamperscan/errors.hpp"

namespace tamperscan {

// ---- Locator ---------------------------------------------------------------

Locator Locator::element_id(std::string id) {
    Locator l;
    l.kind = Kind::Id;
    l.id = std::move(id);
    return l;
}

Locator Locator::form_control(std::size_t form_index, std::string name) {
    Locator l;
    l.kind = Kind::FormControl;
    l.form_index = form_index;
    l.name = std::move(name);
    return l;
}

Locator Locator::child_path(std::vector<std::size_t> indices) {
    Locator l;
    l.kind = Kind::Path;
    l.path = std::move(indices);
    return l;
}

Locator Locator::json(std::string path) {
    Locator l;
    l.kind = Kind::JsonPath;
    l.json_path = std::move(path);
    return l;
}

namespace {

bool parse_index(std::string_view text, std::size_t& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Locator Locator::parse(std::string_view text) {
    if (text.size() > 1 && text[0] == '#') return element_id(std::string(text.substr(1)));
    if (!text.empty() && text[0] == '$') return json(std::string(text));
    if (text.rfind("path:", 0) == 0) {
        std::vector<std::size_t> indices;
        std::string_view rest = text.substr(5);
        while (!rest.empty()) {
            auto slash = rest.find('/');
            std::size_t idx = 0;
            if (!parse_index(rest.substr(0, slash), idx)) {
                throw ParseError("bad path locator '" + std::string(text) + "'");
            }
            indices.push_back(idx);
            rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
        }
        if (indices.empty()) throw ParseError("empty path locator");
        return child_path(std::move(indices));
    }
    if (text.rfind("form[", 0) == 0) {
        auto close = text.find("]/name=");
        std::size_t idx = 0;
        if (close == std::string_view::npos || !parse_index(text.substr(5, close - 5), idx) ||
            close + 7 >= text.size()) {
            throw ParseError("bad form locator '" + std::string(text) + "'");
        }
        return form_control(idx, std::string(text.substr(close + 7)));
    }
    throw ParseError("unknown locator syntax '" + std::string(text) + "'");
}

std::string Locator::to_string() const {
    switch (kind) {
        case Kind::Id:
            return "#" + id;
        case Kind::FormControl:
            return "form[" + std::to_string(form_index) + "]/name=" + name;
        case Kind::JsonPath:
            return json_path;
        case Kind::Path: {
            std::string out = "path:";
            for (std::size_t i = 0; i < path.size(); ++i) {
                if (i) out += "/";
                out += std::to_string(path[i]);
            }
            return out;
        }
    }
    return {};
}

// ---- Node ------------------------------------------------------------------

const std::string* Node::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
        if (k == key) return &v;
    }
    return nullptr;
}

// ---- entities --------------------------------------------------------------

namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) || cp == 0) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

}  // namespace

std::string decode_entities(std::string_view text) {
    static const std::array<std::pair<std::string_view, std::uint32_t>, 8> kNamed{{
        {"amp", '&'}, {"lt", '<'}, {"gt", '>'}, {"quot", '"'},
        {"apos", '\''}, {"nbsp", 0xA0}, {"copy", 0xA9}, {"dollar", '$'},
    }};
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            continue;
        }
        auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back('&');
            continue;
        }
        std::string_view ent = text.substr(i + 1, semi - i - 1);
        bool done = false;
        if (!ent.empty() && ent[0] == '#') {
            std::uint32_t cp = 0;
            bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
            std::string_view digits = ent.substr(hex ? 2 : 1);
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
            if (!digits.empty() && ec == std::errc{} && ptr == digits.data() + digits.size()) {
                append_utf8(out, cp);
                done = true;
            }
        } else {
            for (const auto& [name, cp] : kNamed) {
                if (ent == name) {
                    append_utf8(out, cp);
                    done = true;
                    break;
                }
            }
        }
        if (done) {
            i = semi;
        } else {
            out.push_back('&');
        }
    }
    return out;
}

std::string escape_html(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

// ---- parser ----------------------------------------------------------------

namespace {

const std::unordered_set<std::string_view> kVoid{
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr"};

// Start tags that implicitly close an open <p>.
const std::unordered_set<std::string_view> kClosesP{
    "address", "article", "aside", "blockquote", "div", "dl", "fieldset", "footer",
    "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "nav",
    "ol", "p", "pre", "section", "table", "ul"};

const std::unordered_set<std::string_view> kDropContent{"script", "style"};
const std::unordered_set<std::string_view> kRawText{"script", "style", "textarea", "title"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

class TreeBuilder {
public:
    explicit TreeBuilder(std::vector<Node>& nodes) : nodes_(nodes) {
        nodes_.push_back(Node{Node::Kind::Root, {}, {}, {}, 0, {}});
        open_.push_back(0);
    }

    void text(std::string_view raw) {
        if (raw.empty()) return;
        std::size_t parent = open_.back();
        auto& siblings = nodes_[parent].children;
        // Adjacent text runs merge, as in a DOM.
        if (!siblings.empty() && nodes_[siblings.back()].kind == Node::Kind::Text) {
            nodes_[siblings.back()].text += decode_entities(raw);
            return;
        }
        Node n;
        n.kind = Node::Kind::Text;
        n.text = decode_entities(raw);
        n.parent = parent;
        append(std::move(n));
    }

    // Returns the new element index, or nothing when the tag was dropped.
    std::optional<std::size_t> start(std::string name, std::vector<std::pair<std::string, std::string>> attrs,
                                     bool self_closing) {
        if (name == "form" && in_stack("form")) return std::nullopt;  // nested forms are ignored
        if (kClosesP.contains(name) && in_stack("p")) close_through("p");
        if (name == "li" && in_stack("li")) close_through("li");
        if ((name == "dt" || name == "dd") && (current_is("dt") || current_is("dd"))) pop();
        if ((name == "option" || name == "optgroup") && current_is("option")) pop();
        if (name == "optgroup" && current_is("optgroup")) pop();
        if ((name == "td" || name == "th") && (in_stack("td") || in_stack("th"))) {
            close_through(in_stack("td") ? "td" : "th");
        }
        if (name == "tr" && in_stack("tr")) close_through("tr");

        Node n;
        n.kind = Node::Kind::Element;
        n.name = std::move(name);
        n.attributes = std::move(attrs);
        n.parent = open_.back();
        std::size_t index = append(std::move(n));
        if (!self_closing && !kVoid.contains(nodes_[index].name)) open_.push_back(index);
        return index;
    }

    void end(std::string_view name) {
        if (in_stack(name)) close_through(name);
    }

private:
    std::size_t append(Node n) {
        std::size_t index = nodes_.size();
        std::size_t parent = n.parent;
        nodes_.push_back(std::move(n));
        nodes_[parent].children.push_back(index);
        return index;
    }

    bool current_is(std::string_view name) const {
        return open_.size() > 1 && nodes_[open_.back()].name == name;
    }

    bool in_stack(std::string_view name) const {
        return std::any_of(open_.begin() + 1, open_.end(),
                           [&](std::size_t i) { return nodes_[i].name == name; });
    }

    void close_through(std::string_view name) {
        while (open_.size() > 1) {
            bool match = nodes_[open_.back()].name == name;
            open_.pop_back();
            if (match) break;
        }
    }

    void pop() {
        if (open_.size() > 1) open_.pop_back();
    }

    std::vector<Node>& nodes_;
    std::vector<std::size_t> open_;
};

struct TagToken {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    bool end = false;
    bool self_closing = false;
    std::size_t next = 0;  // offset just past '>'
};

// Parses a tag starting at `pos` ('<'). Returns nothing if this '<' is literal text.
std::optional<TagToken> read_tag(std::string_view html, std::size_t pos) {
    std::size_t i = pos + 1;
    TagToken tok;
    if (i < html.size() && html[i] == '/') {
        tok.end = true;
        ++i;
    }
    if (i >= html.size() || !std::isalpha(static_cast<unsigned char>(html[i]))) return std::nullopt;
    std::size_t name_start = i;
    while (i < html.size() && !is_space(html[i]) && html[i] != '>' && html[i] != '/') ++i;
    tok.name = lower(html.substr(name_start, i - name_start));

    while (i < html.size()) {
        while (i < html.size() && is_space(html[i])) ++i;
        if (i >= html.size()) break;
        if (html[i] == '>') {
            ++i;
            tok.next = i;
            return tok;
        }
        if (html[i] == '/') {
            ++i;
            if (i < html.size() && html[i] == '>') tok.self_closing = true;
            continue;
        }
        std::size_t an = i;
        while (i < html.size() && !is_space(html[i]) && html[i] != '>' && html[i] != '=' &&
               !(html[i] == '/' && i + 1 < html.size() && html[i + 1] == '>')) {
            ++i;
        }
        std::string attr_name = lower(html.substr(an, i - an));
        while (i < html.size() && is_space(html[i])) ++i;
        std::string value;
        if (i < html.size() && html[i] == '=') {
            ++i;
            while (i < html.size() && is_space(html[i])) ++i;
            if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
                char quote = html[i++];
                auto close = html.find(quote, i);
                if (close == std::string_view::npos) close = html.size();
                value = decode_entities(html.substr(i, close - i));
                i = std::min(close + 1, html.size());
            } else {
                std::size_t vs = i;
                while (i < html.size() && !is_space(html[i]) && html[i] != '>') ++i;
                value = decode_entities(html.substr(vs, i - vs));
            }
        }
        if (attr_name.empty()) {
            ++i;
            continue;
        }
        bool seen = std::any_of(tok.attributes.begin(), tok.attributes.end(),
                                [&](const auto& a) { return a.first == attr_name; });
        if (!seen) tok.attributes.emplace_back(std::move(attr_name), std::move(value));
    }
    tok.next = html.size();
    return tok;
}

}  // namespace

Document Document::parse(std::string_view html) {
    Document doc;
    TreeBuilder builder(doc.nodes_);
    std::size_t pos = 0;
    std::size_t text_start = 0;
    auto flush = [&](std::size_t end) {
        if (end > text_start) builder.text(html.substr(text_start, end - text_start));
    };

    while (pos < html.size()) {
        if (html[pos] != '<') {
            ++pos;
            continue;
        }
        if (html.compare(pos, 4, "<!--") == 0) {
            flush(pos);
            auto close = html.find("-->", pos + 4);
            pos = close == std::string_view::npos ? html.size() : close + 3;
            text_start = pos;
            continue;
        }
        if (pos + 1 < html.size() && (html[pos + 1] == '!' || html[pos + 1] == '?')) {
            flush(pos);
            auto close = html.find('>', pos);
            pos = close == std::string_view::npos ? html.size() : close + 1;
            text_start = pos;
            continue;
        }
        auto tag = read_tag(html, pos);
        if (!tag) {
            ++pos;
            continue;
        }
        flush(pos);
        pos = tag->next;
        text_start = pos;
        if (tag->end) {
            builder.end(tag->name);
            continue;
        }
        std::string name = tag->name;
        auto index = builder.start(std::move(tag->name), std::move(tag->attributes), tag->self_closing);
        if (kRawText.contains(name) && !tag->self_closing) {
            std::string closing = "</" + name;
            std::size_t close = pos;
            while (true) {
                close = html.find("</", close);
                if (close == std::string_view::npos) break;
                if (lower(html.substr(close, closing.size())) == closing) break;
                close += 2;
            }
            std::size_t content_end = close == std::string_view::npos ? html.size() : close;
            if (index && !kDropContent.contains(name)) builder.text(html.substr(pos, content_end - pos));
            if (close == std::string_view::npos) {
                pos = html.size();
            } else {
                auto gt = html.find('>', close);
                pos = gt == std::string_view::npos ? html.size() : gt + 1;
            }
            text_start = pos;
            builder.end(name);
        }
    }
    flush(html.size());
    return doc;
}

std::optional<std::size_t> Document::element_by_id(std::string_view id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto* v = nodes_[i].attribute("id");
        if (v && *v == id) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Document::at_path(std::span<const std::size_t> path) const {
    std::size_t current = root();
    for (std::size_t step : path) {
        const auto& children = nodes_[current].children;
        if (step >= children.size()) return std::nullopt;
        current = children[step];
    }
    return current;
}

std::vector<std::size_t> Document::path_of(std::size_t index) const {
    std::vector<std::size_t> path;
    while (index != root()) {
        std::size_t parent = nodes_[index].parent;
        const auto& siblings = nodes_[parent].children;
        auto it = std::find(siblings.begin(), siblings.end(), index);
        path.push_back(static_cast<std::size_t>(it - siblings.begin()));
        index = parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string Document::describe(std::size_t index) const {
    std::vector<std::string> parts;
    while (index != root()) {
        const auto& n = nodes_[index];
        parts.push_back(n.kind == Node::Kind::Text ? "#text" : n.name);
        index = n.parent;
    }
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        if (!out.empty()) out += "/";
        out += *it;
    }
    return out;
}

std::vector<std::size_t> Document::elements_named(std::string_view tag) const {
    std::vector<std::size_t> out;
    // Node indices are assigned in document order by the builder.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].kind == Node::Kind::Element && nodes_[i].name == tag) out.push_back(i);
    }
    return out;
}

std::string Document::text_content(std::size_t index) const {
    const auto& n = nodes_.at(index);
    if (n.kind == Node::Kind::Text) return n.text;
    std::string out;
    for (std::size_t child : n.children) out += text_content(child);
    return out;
}

std::vector<LeafText> Document::leaf_texts() const {
    std::vector<LeafText> out;
    auto blank = [](std::string_view s) {
        return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    };
    // Depth-first, pre-order.
    std::vector<std::size_t> stack{root()};
    while (!stack.empty()) {
        std::size_t i = stack.back();
        stack.pop_back();
        const auto& n = nodes_[i];
        if (n.kind == Node::Kind::Text) {
            if (!blank(n.text)) out.push_back({Locator::child_path(path_of(i)), n.text});
            continue;
        }
        if (n.kind == Node::Kind::Element) {
            if (n.name == "textarea") {
                auto value = text_content(i);
                if (!value.empty()) out.push_back({Locator::child_path(path_of(i)), value});
                continue;
            }
            if (n.name == "input" || n.name == "button") {
                const auto* v = n.attribute("value");
                if (v && !v->empty()) out.push_back({Locator::child_path(path_of(i)), *v});
            }
        }
        for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

std::optional<std::size_t> Document::resolve(const Locator& locator) const {
    switch (locator.kind) {
        case Locator::Kind::Id:
            return element_by_id(locator.id);
        case Locator::Kind::Path:
            return at_path(locator.path);
        default:
            return std::nullopt;
    }
}

// ---- JSON and dispatch -----------------------------------------------------

namespace {

void flatten(const nlohmann::json& value, const std::string& path, std::vector<LeafText>& out) {
    if (value.is_object()) {
        for (auto it = value.begin(); it != value.end(); ++it) flatten(it.value(), path + "." + it.key(), out);
    } else if (value.is_array()) {
        for (std::size_t i = 0; i < value.size(); ++i) flatten(value[i], path + "[" + std::to_string(i) + "]", out);
    } else if (value.is_string()) {
        out.push_back({Locator::json(path), value.get<std::string>()});
    } else if (value.is_number() || value.is_boolean()) {
        out.push_back({Locator::json(path), value.dump()});
    }
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    return lower(haystack).find(needle) != std::string::npos;
}

}  // namespace

std::vector<LeafText> json_leaves(const nlohmann::json& value) {
    std::vector<LeafText> out;
    flatten(value, "$", out);
    return out;
}

ParsedBody ParsedBody::parse(std::string_view body, std::string_view content_type) {
    ParsedBody parsed;
    parsed.raw_ = std::string(body);
    if (contains_ci(content_type, "json")) {
        auto value = nlohmann::json::parse(body, nullptr, false);
        if (value.is_discarded()) {
            parsed.content_ = std::monostate{};
        } else {
            parsed.content_ = std::move(value);
        }
    } else if (contains_ci(content_type, "html") || content_type.empty()) {
        parsed.content_ = Document::parse(body);
    } else {
        parsed.content_ = std::monostate{};
    }
    return parsed;
}

ParsedBody::Kind ParsedBody::kind() const {
    if (std::holds_alternative<Document>(content_)) return Kind::Html;
    if (std::holds_alternative<nlohmann::json>(content_)) return Kind::Json;
    return Kind::Raw;
}

std::vector<LeafText> ParsedBody::leaves() const {
    if (const auto* doc = html()) return doc->leaf_texts();
    if (const auto* j = json()) return json_leaves(*j);
    if (raw_.empty()) return {};
    return {LeafText{Locator::json("$raw"), raw_}};
}

}  // namespace tamperscan
