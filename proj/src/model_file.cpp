#include "thermoform/model_file.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "thermoform/expr.hpp"

namespace thermoform {

namespace {

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

struct Section {
    std::string name;
    int line = 0;
    std::vector<std::pair<std::string, Entry>> entries;

    Entry* find(const std::string& key) {
        for (auto& [k, e] : entries)
            if (k == key) return &e;
        return nullptr;
    }
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw ModelFileError(origin + ":" + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// '#' starts a comment unless it sits inside a quoted string
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

double parse_number(const std::string& origin, int line, const std::string& key,
                    const std::string& text) {
    const char* begin = text.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        fail(origin, line, "value of '" + key + "' is not a number: '" + text + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!text.empty() && text.back() == ',') out.push_back("");
    return out;
}

std::vector<double> parse_numbers(const std::string& origin, int line, const std::string& key,
                                  const std::string& text) {
    std::vector<double> out;
    for (const std::string& item : split_list(text))
        out.push_back(parse_number(origin, line, key, item));
    return out;
}

std::string parse_quoted(const std::string& origin, int line, const std::string& key,
                         const std::string& text) {
    if (text.size() < 2 || text.front() != '"' || text.back() != '"')
        fail(origin, line, "expression '" + key + "' must be a double-quoted string");
    std::string body = text.substr(1, text.size() - 2);
    if (body.find('"') != std::string::npos)
        fail(origin, line, "expression '" + key + "' contains an embedded quote");
    return body;
}

expr::ExprPtr parse_expression(const std::string& origin, int line, const std::string& key,
                               const std::string& text) {
    std::string source = parse_quoted(origin, line, key, text);
    try {
        return expr::parse(source);
    } catch (const expr::SyntaxError& e) {
        fail(origin, line, "in expression for '" + key + "': " + e.what());
    }
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

LoadedModel parse_model_text(const std::string& text, const std::string& origin) {
    std::vector<Section> sections;
    sections.push_back({"", 0, {}});  // top level, before any [section]

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                fail(origin, line_no, "malformed section header '" + line + "'");
            std::string name = trim(line.substr(1, line.size() - 2));
            for (const Section& s : sections)
                if (s.name == name) fail(origin, line_no, "duplicate section [" + name + "]");
            sections.push_back({name, line_no, {}});
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin, line_no, "expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "missing key before '='");
        if (value.empty()) fail(origin, line_no, "missing value for '" + key + "'");
        Section& current = sections.back();
        if (current.find(key))
            fail(origin, line_no, "duplicate key '" + key + "' in section [" + current.name + "]");
        current.entries.emplace_back(key, Entry{value, line_no, false});
    }

    auto section = [&](const std::string& name) -> Section* {
        for (Section& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    };
    auto take = [&](Section& s, const std::string& key) -> Entry* {
        Entry* e = s.find(key);
        if (e) e->used = true;
        return e;
    };
    auto require = [&](Section& s, const std::string& key) -> Entry& {
        Entry* e = take(s, key);
        if (!e)
            fail(origin, s.line, "section [" + s.name + "] is missing the '" + key + "' key");
        return *e;
    };

    // top level: optional schema_version
    if (Entry* sv = take(sections[0], "schema_version")) {
        double v = parse_number(origin, sv->line, "schema_version", sv->value);
        if (v != 1.0) fail(origin, sv->line, "unsupported schema_version (expected 1)");
    }

    Section* model_s = section("model");
    if (!model_s) throw ModelFileError(origin + ": missing the [model] section");
    Section* bounds_s = section("bounds");
    if (!bounds_s) throw ModelFileError(origin + ": missing the [bounds] section");
    Section* eq_s = section("equations");
    if (!eq_s) throw ModelFileError(origin + ": missing the [equations] section");
    Section* entropy_s = section("entropy");  // optional

    ThermoModel model;
    model.name = require(*model_s, "name").value;

    Entry& coords = require(*model_s, "coordinates");
    for (const std::string& c : split_list(coords.value)) {
        if (c.empty()) fail(origin, coords.line, "empty coordinate name in list");
        model.coordinates.push_back(c);
    }
    std::size_t m = model.coordinates.size();
    if (m < 2) fail(origin, coords.line, "need at least two coordinates (energy first)");

    Entry& ref = require(*model_s, "reference");
    model.reference = StatePoint(parse_numbers(origin, ref.line, "reference", ref.value));
    if (model.reference.size() != m)
        fail(origin, ref.line, "reference needs one value per coordinate");

    if (Entry* s0 = take(*model_s, "reference_entropy"))
        model.reference_entropy = parse_number(origin, s0->line, "reference_entropy", s0->value);
    if (Entry* notes = take(*model_s, "notes")) model.notes = notes->value;

    for (const std::string& c : model.coordinates) {
        Entry& b = require(*bounds_s, c);
        std::vector<double> lohi = parse_numbers(origin, b.line, c, b.value);
        if (lohi.size() != 2 || !(lohi[0] < lohi[1]))
            fail(origin, b.line, "bounds for " + c + " must be 'lower, upper' with lower < upper");
        model.bounds.push_back(Interval{lohi[0], lohi[1]});
    }

    Entry& p = require(*eq_s, "p");
    model.intensive.push_back(parse_expression(origin, p.line, "p", p.value));
    for (std::size_t i = 2; i < m; ++i) {
        std::string key = "xi_" + model.coordinates[i];
        Entry& xi = require(*eq_s, key);
        model.intensive.push_back(parse_expression(origin, xi.line, key, xi.value));
    }
    if (Entry* b = take(*eq_s, "boundary"))
        model.boundary = parse_expression(origin, b->line, "boundary", b->value);

    if (entropy_s) {
        Entry& a = require(*entropy_s, "analytic");
        model.analytic_entropy = parse_expression(origin, a.line, "analytic", a.value);
    }

    // reject stray keys so typos surface as diagnostics, not silent defaults
    for (const Section& s : sections) {
        if (s.name != "" && s.name != "model" && s.name != "bounds" && s.name != "equations" &&
            s.name != "entropy")
            fail(origin, s.line, "unknown section [" + s.name + "]");
        for (const auto& [key, entry] : s.entries)
            if (!entry.used)
                fail(origin, entry.line,
                     "unknown key '" + key + "' in section [" + s.name + "]");
    }

    try {
        model.validate();
    } catch (const ModelError& e) {
        throw ModelFileError(origin + ": " + e.what());
    }

    LoadedModel out;
    out.model = std::move(model);
    out.digest = fnv1a_hex(text);
    out.path = origin;
    return out;
}

LoadedModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFileError(path + ": cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model_text(buf.str(), path);
}

}  // namespace thermoform
