#pragma once

// Minimal TOML-subset reader used for the *.toml config and model documents.
// Supported: comments, [table], [a.b], [[array-of-tables]], key = value with
// strings, booleans, numbers, and (nested) arrays. That is the entire grammar
// the shipped documents use.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dreflex::toml {

class Value;
using Array = std::vector<Value>;

class Table {
 public:
  bool contains(const std::string& key) const { return map_.count(key) > 0; }
  const Value& at(const std::string& key) const;
  Value& insert(const std::string& key);

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::string str(const std::string& key) const;
  std::string str_or(const std::string& key, const std::string& fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  const Table& table(const std::string& key) const;
  const Array& array(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, std::shared_ptr<Value>> map_;
  std::vector<std::string> order_;
};

class Value {
 public:
  Value() : v_(0.0) {}
  std::variant<double, bool, std::string, Array, Table> v_;

  bool is_table() const { return std::holds_alternative<Table>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }
  bool is_number() const { return std::holds_alternative<double>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  double as_number() const;
  const std::string& as_string() const;
  bool as_bool() const;
  const Array& as_array() const;
  const Table& as_table() const;
  Table& as_table();
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

Table parse(const std::string& text);
Table parse_file(const std::string& path);

}  // namespace dreflex::toml
