#pragma once

// Experiment configs: JSON text where every physical quantity is written as
// {"value": x, "unit": "..."}.  Errors carry the line of the offending key.

#include <kzpsd/kzpsd.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace kzpsd::cli {

using nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

namespace detail {

// Counts newlines as the parser consumes characters; the lexer reads one
// character ahead, which the recorded lines tolerate.
struct CountingIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p;
  std::size_t* line;

  reference operator*() const { return *p; }
  CountingIterator& operator++() {
    if (*p == '\n') ++*line;
    ++p;
    return *this;
  }
  CountingIterator operator++(int) {
    CountingIterator t = *this;
    ++*this;
    return t;
  }
  bool operator==(const CountingIterator& o) const { return p == o.p; }
  bool operator!=(const CountingIterator& o) const { return p != o.p; }
};

// Records the line of every key and array element, by JSON pointer.
class LineSax : public nlohmann::json_sax<json> {
public:
  explicit LineSax(const std::size_t* line) : line_(line) {}

  std::map<std::string, std::size_t> lines;

  bool null() override { return scalar(); }
  bool boolean(bool) override { return scalar(); }
  bool number_integer(number_integer_t) override { return scalar(); }
  bool number_unsigned(number_unsigned_t) override { return scalar(); }
  bool number_float(number_float_t, const string_t&) override { return scalar(); }
  bool string(string_t&) override { return scalar(); }
  bool binary(binary_t&) override { return scalar(); }
  bool start_object(std::size_t) override { return open(false); }
  bool start_array(std::size_t) override { return open(true); }
  bool end_object() override { return close(); }
  bool end_array() override { return close(); }
  bool key(string_t& k) override {
    stack_.back().key = escape(k);
    lines[container() + "/" + stack_.back().key] = *line_;
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

private:
  struct Level {
    bool array = false;
    std::size_t index = 0;
    std::string key;
  };

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  // pointer of the innermost open container
  std::string container() const {
    std::string p;
    for (std::size_t i = 0; i + 1 < stack_.size(); ++i)
      p += "/" + (stack_[i].array ? std::to_string(stack_[i].index) : stack_[i].key);
    return p;
  }

  void mark_element() {
    if (!stack_.empty() && stack_.back().array)
      lines[container() + "/" + std::to_string(stack_.back().index)] = *line_;
  }
  void next_element() {
    if (!stack_.empty() && stack_.back().array) ++stack_.back().index;
  }
  bool scalar() {
    mark_element();
    next_element();
    return true;
  }
  bool open(bool array) {
    mark_element();
    stack_.push_back({array, 0, ""});
    return true;
  }
  bool close() {
    stack_.pop_back();
    next_element();
    return true;
  }

  const std::size_t* line_;
  std::vector<Level> stack_;
};

}  // namespace detail

/// Unit system: "dimensionless" takes unit "1" everywhere; "physical" uses
/// SI internally (s, m, W).
enum class UnitSystem { Dimensionless, Physical };

/// A parsed config with line lookup.
class Config {
public:
  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  static Config parse(const std::string& text, const std::string& name) {
    Config c;
    c.file_ = name;
    try {
      c.doc_ = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(name, line_at(text, e.byte), std::string("malformed JSON: ") + e.what());
    }
    std::size_t line = 1;
    detail::LineSax sax(&line);
    const char* begin = text.data();
    json::sax_parse(detail::CountingIterator{begin, &line}, detail::CountingIterator{begin + text.size(), &line},
                    &sax);
    c.lines_ = std::move(sax.lines);
    if (!c.doc_.is_object()) throw ConfigError(name, 1, "top level must be an object");
    return c;
  }

  const json& doc() const { return doc_; }
  const std::string& file() const { return file_; }

  std::size_t line(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      const auto cut = p.rfind('/');
      if (cut == std::string::npos || p.empty()) return 1;
      p = p.substr(0, cut);
    }
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw ConfigError(file_, line(pointer), (pointer.empty() ? std::string("/") : pointer) + ": " + what);
  }

  bool has(const std::string& pointer) const { return doc_.contains(json::json_pointer(pointer)); }

  const json& at(const std::string& pointer) const {
    if (!has(pointer)) {
      const auto cut = pointer.rfind('/');
      fail(pointer.substr(0, cut), "missing required key '" + pointer.substr(cut + 1) + "'");
    }
    return doc_.at(json::json_pointer(pointer));
  }

  double number(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_number()) fail(pointer, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(pointer, "expected a finite number");
    return x;
  }

  std::int64_t integer(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_number_integer()) fail(pointer, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::string text(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_string()) fail(pointer, "expected a string");
    return v.get<std::string>();
  }

  std::string choice(const std::string& pointer, std::initializer_list<const char*> options) const {
    const std::string s = text(pointer);
    std::string list;
    for (const char* o : options) {
      if (s == o) return s;
      list += std::string(list.empty() ? "" : ", ") + o;
    }
    fail(pointer, "unknown value '" + s + "' (expected one of " + list + ")");
  }

  std::size_t array_size(const std::string& pointer) const {
    const json& v = at(pointer);
    if (!v.is_array()) fail(pointer, "expected an array");
    return v.size();
  }

  UnitSystem system() const {
    return choice("/units", {"dimensionless", "physical"}) == "physical" ? UnitSystem::Physical
                                                                         : UnitSystem::Dimensionless;
  }

  /// Quantity of a given kind, converted to internal units.
  double quantity(const std::string& pointer, const std::string& kind) const {
    const json& v = at(pointer);
    if (!v.is_object()) fail(pointer, "expected {\"value\": ..., \"unit\": ...}");
    const double value = number(pointer + "/value");
    const std::string unit = text(pointer + "/unit");
    check_keys(pointer, {"value", "unit"});
    if (system() == UnitSystem::Dimensionless) {
      if (unit != "1") fail(pointer + "/unit", "dimensionless configs take unit \"1\", got '" + unit + "'");
      return value;
    }
    const auto scale = unit_scale(kind, unit);
    if (!scale) fail(pointer + "/unit", "unit '" + unit + "' is not a " + kind + " unit");
    return value * *scale;
  }

  std::optional<double> optional_quantity(const std::string& pointer, const std::string& kind) const {
    if (!has(pointer)) return std::nullopt;
    return quantity(pointer, kind);
  }

  /// Rejects keys of an object other than `allowed`.
  void check_keys(const std::string& pointer, std::initializer_list<const char*> allowed) const {
    const json& v = pointer.empty() ? doc_ : doc_.at(json::json_pointer(pointer));
    if (!v.is_object()) fail(pointer, "expected an object");
    for (const auto& item : v.items()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || item.key() == a;
      if (!ok) fail(pointer + "/" + item.key(), "unknown key '" + item.key() + "'");
    }
  }

private:
  static std::size_t line_at(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    return line;
  }

  static std::optional<double> unit_scale(const std::string& kind, const std::string& unit) {
    static const std::map<std::string, std::map<std::string, double>> table{
        {"time", {{"s", 1.0}, {"ns", 1e-9}, {"ps", 1e-12}, {"fs", 1e-15}}},
        {"length", {{"m", 1.0}, {"km", 1e3}}},
        {"attenuation", {{"1/m", 1.0}, {"1/km", 1e-3}, {"dB/km", std::log(10.0) / 10.0 * 1e-3}}},
        {"nonlinearity", {{"1/(W m)", 1.0}, {"1/(W km)", 1e-3}}},
        {"power", {{"W", 1.0}, {"mW", 1e-3}}},
        {"angular_frequency", {{"rad/s", 1.0}, {"rad/ps", 1e12}}},
        {"amplitude", {{"sqrt(W)", 1.0}}},
        {"beta0", {{"1/m", 1.0}, {"1/km", 1e-3}}},
        {"beta1", {{"s/m", 1.0}, {"ps/km", 1e-15}}},
        {"beta2", {{"s^2/m", 1.0}, {"ps^2/km", 1e-27}}},
        {"beta3", {{"s^3/m", 1.0}, {"ps^3/km", 1e-39}}},
        {"beta4", {{"s^4/m", 1.0}, {"ps^4/km", 1e-51}}},
    };
    const auto k = table.find(kind);
    if (k == table.end()) return std::nullopt;
    const auto u = k->second.find(unit);
    if (u == k->second.end()) return std::nullopt;
    return u->second;
  }

  std::string file_;
  json doc_;
  std::map<std::string, std::size_t> lines_;
};

}  // namespace kzpsd::cli
