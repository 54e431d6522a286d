#include "dreflex/toml_lite.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace dreflex::toml {

const Value& Table::at(const std::string& key) const {
  auto it = map_.find(key);
  if (it == map_.end()) throw ParseError("missing key: " + key);
  return *it->second;
}

Value& Table::insert(const std::string& key) {
  auto it = map_.find(key);
  if (it == map_.end()) {
    auto v = std::make_shared<Value>();
    map_[key] = v;
    order_.push_back(key);
    return *v;
  }
  return *it->second;
}

double Table::number(const std::string& key) const { return at(key).as_number(); }

double Table::number_or(const std::string& key, double fallback) const {
  return contains(key) ? at(key).as_number() : fallback;
}

std::string Table::str(const std::string& key) const { return at(key).as_string(); }

std::string Table::str_or(const std::string& key, const std::string& fallback) const {
  return contains(key) ? at(key).as_string() : fallback;
}

bool Table::boolean_or(const std::string& key, bool fallback) const {
  return contains(key) ? at(key).as_bool() : fallback;
}

std::vector<double> Table::numbers(const std::string& key) const {
  const Array& a = at(key).as_array();
  std::vector<double> out;
  out.reserve(a.size());
  for (const Value& v : a) out.push_back(v.as_number());
  return out;
}

const Table& Table::table(const std::string& key) const { return at(key).as_table(); }
const Array& Table::array(const std::string& key) const { return at(key).as_array(); }

std::vector<std::string> Table::keys() const { return order_; }

double Value::as_number() const {
  if (!is_number()) throw ParseError("value is not a number");
  return std::get<double>(v_);
}

const std::string& Value::as_string() const {
  if (!is_string()) throw ParseError("value is not a string");
  return std::get<std::string>(v_);
}

bool Value::as_bool() const {
  if (!std::holds_alternative<bool>(v_)) throw ParseError("value is not a boolean");
  return std::get<bool>(v_);
}

const Array& Value::as_array() const {
  if (!is_array()) throw ParseError("value is not an array");
  return std::get<Array>(v_);
}

const Table& Value::as_table() const {
  if (!is_table()) throw ParseError("value is not a table");
  return std::get<Table>(v_);
}

Table& Value::as_table() {
  if (!is_table()) throw ParseError("value is not a table");
  return std::get<Table>(v_);
}

namespace {

struct Cursor {
  const std::string& s;
  size_t i = 0;
  int line = 1;

  bool eof() const { return i >= s.size(); }
  char peek() const { return s[i]; }
  char get() {
    char c = s[i++];
    if (c == '\n') ++line;
    return c;
  }

  void skip_ws_inline() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("line " + std::to_string(line) + ": " + msg);
  }
};

std::string parse_bare_key(Cursor& c) {
  std::string key;
  while (!c.eof() && (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_' ||
                      c.peek() == '-')) {
    key += c.get();
  }
  if (key.empty()) c.fail("expected key");
  return key;
}

Value parse_value(Cursor& c);

Value parse_array(Cursor& c) {
  c.get();  // '['
  Array out;
  for (;;) {
    // arrays may span lines
    while (!c.eof() && (c.peek() == ' ' || c.peek() == '\t' || c.peek() == '\n' ||
                        c.peek() == '\r' || c.peek() == '#')) {
      if (c.peek() == '#') {
        while (!c.eof() && c.peek() != '\n') c.get();
      } else {
        c.get();
      }
    }
    if (c.eof()) c.fail("unterminated array");
    if (c.peek() == ']') {
      c.get();
      break;
    }
    out.push_back(parse_value(c));
    while (!c.eof() && (c.peek() == ' ' || c.peek() == '\t' || c.peek() == '\n' ||
                        c.peek() == '\r')) {
      c.get();
    }
    if (!c.eof() && c.peek() == ',') c.get();
  }
  Value v;
  v.v_ = std::move(out);
  return v;
}

Value parse_value(Cursor& c) {
  c.skip_ws_inline();
  if (c.eof()) c.fail("expected value");
  char ch = c.peek();
  Value v;
  if (ch == '"') {
    c.get();
    std::string s;
    while (!c.eof() && c.peek() != '"') {
      char x = c.get();
      if (x == '\\' && !c.eof()) {
        char e = c.get();
        switch (e) {
          case 'n': s += '\n'; break;
          case 't': s += '\t'; break;
          case '"': s += '"'; break;
          case '\\': s += '\\'; break;
          default: c.fail("bad escape");
        }
      } else {
        s += x;
      }
    }
    if (c.eof()) c.fail("unterminated string");
    c.get();
    v.v_ = std::move(s);
    return v;
  }
  if (ch == '[') return parse_array(c);
  std::string tok;
  while (!c.eof() && c.peek() != '\n' && c.peek() != '#' && c.peek() != ',' && c.peek() != ']' &&
         c.peek() != ' ' && c.peek() != '\t' && c.peek() != '\r') {
    tok += c.get();
  }
  if (tok == "true") {
    v.v_ = true;
    return v;
  }
  if (tok == "false") {
    v.v_ = false;
    return v;
  }
  try {
    size_t pos = 0;
    double d = std::stod(tok, &pos);
    if (pos != tok.size()) c.fail("bad number: " + tok);
    v.v_ = d;
    return v;
  } catch (const std::exception&) {
    c.fail("unrecognized value: " + tok);
  }
}

// Resolve a dotted path of tables, creating as needed.
Table* descend(Table* root, const std::vector<std::string>& path, Cursor& c) {
  Table* t = root;
  for (const std::string& part : path) {
    Value& v = t->insert(part);
    if (std::holds_alternative<double>(v.v_) && !v.is_table()) {
      // freshly inserted values default to number; turn into table
      v.v_ = Table{};
    }
    if (v.is_array()) {
      Array& a = std::get<Array>(v.v_);
      if (a.empty() || !a.back().is_table()) c.fail("path crosses non-table array");
      t = &std::get<Table>(a.back().v_);
    } else if (v.is_table()) {
      t = &v.as_table();
    } else {
      c.fail("key redefined as table: " + part);
    }
  }
  return t;
}

std::vector<std::string> parse_dotted(Cursor& c) {
  std::vector<std::string> path;
  path.push_back(parse_bare_key(c));
  while (!c.eof() && c.peek() == '.') {
    c.get();
    path.push_back(parse_bare_key(c));
  }
  return path;
}

}  // namespace

Table parse(const std::string& text) {
  Cursor c{text};
  Table root;
  Table* current = &root;
  while (!c.eof()) {
    c.skip_ws_inline();
    if (c.eof()) break;
    char ch = c.peek();
    if (ch == '\n' || ch == '\r') {
      c.get();
      continue;
    }
    if (ch == '#') {
      while (!c.eof() && c.peek() != '\n') c.get();
      continue;
    }
    if (ch == '[') {
      c.get();
      bool array_of_tables = (!c.eof() && c.peek() == '[');
      if (array_of_tables) c.get();
      auto path = parse_dotted(c);
      if (c.eof() || c.get() != ']') c.fail("expected ]");
      if (array_of_tables && (c.eof() || c.get() != ']')) c.fail("expected ]]");
      if (array_of_tables) {
        std::vector<std::string> prefix(path.begin(), path.end() - 1);
        Table* parent = descend(&root, prefix, c);
        Value& v = parent->insert(path.back());
        if (!v.is_array()) v.v_ = Array{};
        Array& a = std::get<Array>(v.v_);
        Value elem;
        elem.v_ = Table{};
        a.push_back(std::move(elem));
        current = &std::get<Table>(a.back().v_);
      } else {
        current = descend(&root, path, c);
      }
      continue;
    }
    auto path = parse_dotted(c);
    c.skip_ws_inline();
    if (c.eof() || c.get() != '=') c.fail("expected =");
    Value v = parse_value(c);
    Table* t = current;
    if (path.size() > 1) {
      std::vector<std::string> prefix(path.begin(), path.end() - 1);
      t = descend(current, prefix, c);
    }
    t->insert(path.back()) = std::move(v);
  }
  return root;
}

Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace dreflex::toml
