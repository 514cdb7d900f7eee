#include "waves/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "waves/errors.hpp"

namespace waves::io {

std::string fmt17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

namespace {
std::string number_token(double v) {
    // Non-finite values are not valid JSON numbers; emit them as strings.
    if (!std::isfinite(v)) return "\"" + fmt17(v) + "\"";
    return fmt17(v);
}
} // namespace

JsonWriter& JsonWriter::number(const std::string& key, double v) {
    items_.emplace_back(key, number_token(v));
    return *this;
}

JsonWriter& JsonWriter::integer(const std::string& key, long long v) {
    items_.emplace_back(key, std::to_string(v));
    return *this;
}

JsonWriter& JsonWriter::boolean(const std::string& key, bool v) {
    items_.emplace_back(key, v ? "true" : "false");
    return *this;
}

JsonWriter& JsonWriter::text(const std::string& key, const std::string& v) {
    items_.emplace_back(key, "\"" + json_escape(v) + "\"");
    return *this;
}

JsonWriter& JsonWriter::raw(const std::string& key, const std::string& raw_json) {
    items_.emplace_back(key, raw_json);
    return *this;
}

JsonWriter& JsonWriter::null(const std::string& key) {
    items_.emplace_back(key, "null");
    return *this;
}

std::string JsonWriter::str() const {
    std::string out = "{";
    for (size_t i = 0; i < items_.size(); ++i) {
        if (i) out += ", ";
        out += "\"" + json_escape(items_[i].first) + "\": " + items_[i].second;
    }
    out += "}";
    return out;
}

std::string json_number_array(const Eigen::VectorXd& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += number_token(v[i]);
    }
    out += "]";
    return out;
}

std::string json_number_array(const std::vector<double>& v) {
    return json_number_array(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw SolverError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw SolverError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw SolverError("rename " + tmp + " -> " + path + ": " + std::strerror(errno));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw ParseError(what + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception&) {
        throw ParseError(what + ": cannot parse '" + s + "' as a number");
    }
}

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
} // namespace

Config Config::parse_file(const std::string& path) {
    return parse_text(read_file(path), path);
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.kv_[key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ParseError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

std::string Config::get_string_or(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

double Config::get_double(const std::string& key) const {
    return parse_double(get_string(key), origin_ + ": key '" + key + "'");
}

double Config::get_double_or(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    return parse_double(it->second, origin_ + ": key '" + key + "'");
}

long long Config::get_int(const std::string& key) const {
    double v = get_double(key);
    long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
        throw ParseError(origin_ + ": key '" + key + "' must be an integer, got '" + get_string(key) + "'");
    return n;
}

long long Config::get_int_or(const std::string& key, long long dflt) const {
    if (!has(key)) return dflt;
    return get_int(key);
}

} // namespace waves::io
