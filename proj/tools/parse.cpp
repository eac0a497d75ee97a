// Copyright (c) densreach contributors.
// SPDX-License-Identifier: Apache-2.0
#include "parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

namespace densreach::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '[') {
            ++depth;
        } else if (c == ']') {
            --depth;
        }
        if (c == sep && depth == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double to_double(const std::string& raw, const std::string& what) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || ptr != end) {
        throw UsageError("cannot read a number from '" + raw + "' in " + what);
    }
    return v;
}

// Linear form sum_i coef[i] x_i + constant.
struct Linear {
    Vector coef;
    double constant = 0.0;
};

class LinearParser {
  public:
    LinearParser(std::string text, const std::vector<std::string>& names) : s_(std::move(text)), names_(names) {}

    Linear parse() {
        Linear out{Vector::Zero(static_cast<Eigen::Index>(names_.size())), 0.0};
        skip();
        if (pos_ >= s_.size()) {
            fail("empty expression");
        }
        bool first = true;
        while (pos_ < s_.size()) {
            double sign = 1.0;
            if (s_[pos_] == '+' || s_[pos_] == '-') {
                sign = s_[pos_] == '-' ? -1.0 : 1.0;
                ++pos_;
                skip();
            } else if (!first) {
                fail("expected + or -");
            }
            term(out, sign);
            first = false;
            skip();
        }
        return out;
    }

  private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw UsageError("set expression '" + s_ + "': " + why);
    }

    void term(Linear& out, double sign) {
        double coef = 1.0;
        bool have_number = false;
        if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
            std::size_t end = pos_;
            while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                                       s_[end] == 'e' || s_[end] == 'E' ||
                                       ((s_[end] == '-' || s_[end] == '+') && (s_[end - 1] == 'e' || s_[end - 1] == 'E')))) {
                ++end;
            }
            coef = to_double(s_.substr(pos_, end - pos_), "set expression");
            pos_ = end;
            have_number = true;
            skip();
            if (pos_ < s_.size() && s_[pos_] == '*') {
                ++pos_;
                skip();
            } else if (pos_ >= s_.size() || !(std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                out.constant += sign * coef;
                return;
            }
        }
        std::size_t end = pos_;
        while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) {
            ++end;
        }
        if (end == pos_) {
            fail(have_number ? "expected a variable after '*'" : "expected a number or variable");
        }
        const std::string name = s_.substr(pos_, end - pos_);
        pos_ = end;
        out.coef[index_of(name)] += sign * coef;
    }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) {
                return static_cast<int>(i);
            }
        }
        if (name.size() > 1 && name[0] == 'x') {
            int k = 0;
            const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
            if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1 &&
                k <= static_cast<int>(names_.size())) {
                return k - 1;
            }
        }
        std::string known;
        for (const auto& n : names_) {
            known += (known.empty() ? "" : ", ") + n;
        }
        fail("unknown variable '" + name + "' (known: " + known + ")");
    }

    std::string s_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;
};

}  // namespace

Polyhedron parse_set(const std::string& text, const std::vector<std::string>& names) {
    const int d = static_cast<int>(names.size());
    Polyhedron p(d);
    for (const auto& raw : split(text, ',')) {
        const std::string atom = trim(raw);
        if (atom.empty()) {
            continue;
        }
        static const std::vector<std::string> ops = {"<=", ">=", "==", "<", ">", "="};
        std::size_t at = std::string::npos;
        std::string op;
        for (const auto& o : ops) {
            const auto k = atom.find(o);
            if (k != std::string::npos && (at == std::string::npos || k < at ||
                                           (k == at && o.size() > op.size()))) {
                at = k;
                op = o;
            }
        }
        if (at == std::string::npos) {
            throw UsageError("set expression '" + atom + "': missing comparison operator");
        }
        const auto lhs = LinearParser(atom.substr(0, at), names).parse();
        const auto rhs = LinearParser(atom.substr(at + op.size()), names).parse();
        // lhs - rhs (op) 0
        const Vector a = lhs.coef - rhs.coef;
        const double c = rhs.constant - lhs.constant;
        if (a.cwiseAbs().maxCoeff() == 0.0) {
            throw UsageError("set expression '" + atom + "': no variable");
        }
        if (op == "<=" || op == "<") {
            p.add_row(a, c);
        } else if (op == ">=" || op == ">") {
            p.add_row(-a, -c);
        } else {
            p.add_row(a, c);
            p.add_row(-a, -c);
        }
    }
    if (p.rows() == 0) {
        throw UsageError("set expression is empty");
    }
    return p;
}

HyperRectangle parse_box(const std::string& text) {
    const auto parts = split(text, ';');
    Vector lo(static_cast<Eigen::Index>(parts.size())), hi(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto ends = split(parts[i], ',');
        if (ends.size() != 2) {
            throw UsageError("box '" + text + "': expected lo,hi for coordinate " + std::to_string(i + 1));
        }
        lo[static_cast<Eigen::Index>(i)] = to_double(ends[0], "box");
        hi[static_cast<Eigen::Index>(i)] = to_double(ends[1], "box");
        if (!(lo[static_cast<Eigen::Index>(i)] < hi[static_cast<Eigen::Index>(i)])) {
            throw UsageError("box '" + text + "': empty interval in coordinate " + std::to_string(i + 1));
        }
    }
    return {lo, hi};
}

std::vector<double> parse_list(const std::string& text) {
    std::string s = trim(text);
    if (!s.empty() && s.front() == '[' && s.back() == ']') {
        s = s.substr(1, s.size() - 2);
    }
    std::vector<double> out;
    for (const auto& part : split(s, ',')) {
        out.push_back(to_double(part, "list '" + text + "'"));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_list(text)) {
        if (v != static_cast<int>(v)) {
            throw UsageError("list '" + text + "': expected integers");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

InitialDistribution parse_rho0(const std::string& text, const HyperRectangle& support) {
    const std::string s = trim(text);
    if (s == "uniform") {
        return InitialDistribution::uniform(support);
    }
    const std::string prefix = "gauss:";
    if (s.rfind(prefix, 0) != 0) {
        throw UsageError("rho0 '" + text + "': expected 'uniform' or 'gauss:mu=[...],sigma=...'");
    }
    std::map<std::string, std::vector<double>> kv;
    for (const auto& part : split(s.substr(prefix.size()), ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) {
            throw UsageError("rho0 '" + text + "': expected key=value in '" + part + "'");
        }
        kv[trim(part.substr(0, eq))] = parse_list(part.substr(eq + 1));
    }
    const int d = support.dim();
    auto expand = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw UsageError(std::string("rho0 '") + text + "': missing " + key);
        }
        if (it->second.size() == 1) {
            return Vector(Vector::Constant(d, it->second[0]));
        }
        if (static_cast<int>(it->second.size()) != d) {
            throw UsageError(std::string("rho0 '") + text + "': " + key + " needs 1 or " + std::to_string(d) +
                             " values");
        }
        return Vector(Eigen::Map<const Vector>(it->second.data(), d));
    };
    return InitialDistribution::truncated_gaussian(support, expand("mu"), expand("sigma"));
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace densreach::cli
