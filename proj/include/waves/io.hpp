#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace waves::io {

/// Format a double with 17 significant digits, enough to round-trip the bit
/// pattern through text. Infinities come back as the words inf/-inf, which
/// the JSON emitter turns into quoted strings.
std::string fmt17(double v);

/// Minimal ordered JSON emitter. The data-file contracts pin both field
/// names and numeric formatting, and resumed runs must reproduce output byte
/// for byte, so the general-purpose serializer is used only for parsing.
class JsonWriter {
  public:
    JsonWriter& number(const std::string& key, double v);
    JsonWriter& integer(const std::string& key, long long v);
    JsonWriter& boolean(const std::string& key, bool v);
    JsonWriter& text(const std::string& key, const std::string& v);
    JsonWriter& raw(const std::string& key, const std::string& raw_json);
    JsonWriter& null(const std::string& key);
    std::string str() const; // single-line object

  private:
    std::vector<std::pair<std::string, std::string>> items_;
};

std::string json_escape(const std::string& s);
std::string json_number_array(const Eigen::VectorXd& v);
std::string json_number_array(const std::vector<double>& v);

/// Write content to path via a temporary file in the same directory followed
/// by an atomic rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path); // ParseError when unreadable

/// key = value configuration with '#' comments and blank lines.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_text(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& dflt) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double dflt) const;
    long long get_int(const std::string& key) const;
    long long get_int_or(const std::string& key, long long dflt) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
    std::string origin_;
};

double parse_double(const std::string& s, const std::string& what);

} // namespace waves::io
