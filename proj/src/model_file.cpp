#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "difflab/errors.hpp"
#include "difflab/model.hpp"

namespace difflab {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Scalar {
    bool quoted = false;
    std::string text;
};

struct Value {
    std::vector<Scalar> items;
    bool array = false;
    int line = 0;
};

class Reader {
public:
    Reader(const std::string& text, std::string origin) : origin_(std::move(origin)) {
        std::istringstream in(text);
        std::string line, section;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            std::string_view v = strip(cut_comment(line));
            if (v.empty()) continue;
            if (v.front() == '[') {
                if (v.back() != ']') fail(number, "unterminated section header");
                section = std::string(strip(v.substr(1, v.size() - 2)));
                if (section.empty()) fail(number, "empty section name");
                continue;
            }
            const auto eq = v.find('=');
            if (eq == std::string_view::npos) fail(number, "expected key = value");
            std::string key(strip(v.substr(0, eq)));
            if (key.empty()) fail(number, "missing key");
            if (!section.empty()) key = section + "." + key;
            Value value = parse_value(strip(v.substr(eq + 1)), number);
            value.line = number;
            if (!entries_.emplace(key, value).second) fail(number, "duplicate key \"" + key + "\"");
        }
    }

    const Value* find(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return nullptr;
        used_.push_back(key);
        return &it->second;
    }

    std::string string(const std::string& key, const Value& v) {
        if (v.array || v.items.size() != 1) fail(v.line, "\"" + key + "\" must be a single value");
        return v.items[0].text;
    }

    void reject_unknown() {
        for (const auto& [key, value] : entries_) {
            bool seen = false;
            for (const auto& u : used_) seen |= u == key;
            if (!seen) fail(value.line, "unknown key \"" + key + "\"");
        }
    }

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ModelFileError(origin_ + ":" + std::to_string(line) + ": " + what);
    }

private:
    static std::string_view strip(std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    }

    static std::string_view cut_comment(std::string_view s) {
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '#' && !quoted) return s.substr(0, i);
        }
        return s;
    }

    Value parse_value(std::string_view v, int line) {
        Value out;
        if (v.empty()) fail(line, "missing value");
        if (v.front() == '[') {
            if (v.back() != ']') fail(line, "unterminated array");
            out.array = true;
            std::string_view body = v.substr(1, v.size() - 2);
            while (!strip(body).empty()) {
                body = strip(body);
                std::size_t end = 0;
                if (body.front() == '"') {
                    end = body.find('"', 1);
                    if (end == std::string_view::npos) fail(line, "unterminated string");
                    ++end;
                } else {
                    end = body.find(',');
                    if (end == std::string_view::npos) end = body.size();
                }
                out.items.push_back(scalar(strip(body.substr(0, end)), line));
                body = strip(body.substr(end));
                if (!body.empty()) {
                    if (body.front() != ',') fail(line, "expected ',' in array");
                    body.remove_prefix(1);
                }
            }
            return out;
        }
        out.items.push_back(scalar(v, line));
        return out;
    }

    Scalar scalar(std::string_view v, int line) {
        if (v.empty()) fail(line, "empty value");
        if (v.front() == '"') {
            if (v.size() < 2 || v.back() != '"') fail(line, "unterminated string");
            return {true, std::string(v.substr(1, v.size() - 2))};
        }
        return {false, std::string(v)};
    }

    std::string origin_;
    std::map<std::string, Value> entries_;
    std::vector<std::string> used_;
};

double number(const Reader& r, const Scalar& s, int line) {
    if (s.text == "inf" || s.text == "+inf") return inf;
    if (s.text == "-inf") return -inf;
    double v = 0.0;
    const char* first = s.text.data();
    const char* last = first + s.text.size();
    if (!s.text.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || std::isnan(v))
        r.fail(line, "expected a number, \"inf\" or \"-inf\", got \"" + s.text + "\"");
    return v;
}

expr::Expr expression(const Reader& r, const std::string& key, const std::string& text, int line) {
    try {
        return expr::Expr::parse(text);
    } catch (const SyntaxError& e) {
        r.fail(line, key + ": " + e.what());
    }
}

}  // namespace

DiffusionSpec parse_model(const std::string& text, const std::string& origin) {
    Reader r(text, origin);

    std::optional<std::string> name;
    if (const Value* v = r.find("name")) name = r.string("name", *v);

    const Value* dom = r.find("domain");
    if (!dom) r.fail(0, "missing \"domain\"");
    if (!dom->array || dom->items.size() != 2) r.fail(dom->line, "\"domain\" must be an array [left, right]");
    const double left = number(r, dom->items[0], dom->line);
    const double right = number(r, dom->items[1], dom->line);

    std::vector<SpeedAtom> atoms;
    for (Side side : {Side::Left, Side::Right}) {
        const std::string key = std::string("atoms.") + to_string(side);
        if (const Value* v = r.find(key)) {
            const double m = number(r, Scalar{false, r.string(key, *v)}, v->line);
            if (std::isinf(m) && m > 0)
                atoms.push_back({side, AtomMass::infinite()});
            else if (m >= 0.0 && std::isfinite(m))
                atoms.push_back({side, AtomMass::finite(m)});
            else
                r.fail(v->line, key + " must be a non-negative number or \"inf\"");
        }
    }

    bool closed[2] = {std::isfinite(left) && atom_on(atoms, Side::Left).has_value(),
                      std::isfinite(right) && atom_on(atoms, Side::Right).has_value()};
    if (const Value* v = r.find("closed")) {
        closed[0] = closed[1] = false;
        for (const auto& item : v->items) {
            if (item.text == "left")
                closed[0] = true;
            else if (item.text == "right")
                closed[1] = true;
            else if (item.text == "both")
                closed[0] = closed[1] = true;
            else if (item.text != "none")
                r.fail(v->line, "closed must list \"left\", \"right\", \"both\" or \"none\"");
        }
    }

    Interval domain = [&] {
        try {
            return Interval(left, right, closed[0], closed[1]);
        } catch (const DomainError& e) {
            r.fail(dom->line, e.what());
        }
    }();

    const Value* sigma = r.find("sigma");
    const Value* drift = r.find("drift");
    const Value* scale = r.find("scale");
    const Value* dscale = r.find("scale_derivative");
    const Value* density = r.find("speed_density");
    r.reject_unknown();

    if (sigma) {
        if (scale || dscale || density) r.fail(sigma->line, "give either sigma/drift or scale/speed_density, not both");
        CoefficientSpec c{drift ? expression(r, "drift", r.string("drift", *drift), drift->line) : expr::Expr(),
                          expression(r, "sigma", r.string("sigma", *sigma), sigma->line), domain};
        return DiffusionSpec{ItoDiffusion{std::move(c), std::move(atoms)}, name};
    }
    if (drift) r.fail(drift->line, "drift given without sigma");
    if (!scale || !density) r.fail(0, "need sigma (and optionally drift), or scale and speed_density");

    auto s = std::make_shared<expr::Expr>(expression(r, "scale", r.string("scale", *scale), scale->line));
    auto m = std::make_shared<expr::Expr>(expression(r, "speed_density", r.string("speed_density", *density),
                                                     density->line));
    RealFunction derivative;
    if (dscale) {
        auto ds = std::make_shared<expr::Expr>(
            expression(r, "scale_derivative", r.string("scale_derivative", *dscale), dscale->line));
        derivative = [ds](double x) { return (*ds)(x); };
    }
    ScaleSpeedSpec ss{[s](double x) { return (*s)(x); }, std::move(derivative),
                      [m](double x) { return (*m)(x); }, domain, std::move(atoms), {},
                      s->ast() == expr::Expr::variable().ast()};
    return DiffusionSpec{std::move(ss), name};
}

DiffusionSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelFileError("cannot open model file \"" + path + "\"");
    std::ostringstream text;
    text << in.rdbuf();
    auto spec = parse_model(text.str(), path);
    if (!spec.name) spec.name = path;
    return spec;
}

}  // namespace difflab
