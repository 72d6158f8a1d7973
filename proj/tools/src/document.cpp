#include "pinn/app/document.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace pinn::app {

ConfigError::ConfigError(std::size_t line, std::size_t column, const std::string& message)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
            message),
      line_(line),
      column_(column) {}

ConfigError::ConfigError(std::string path, const std::string& message)
    : Error(path + ": " + message), path_(std::move(path)) {}

std::string_view Value::type_name() const noexcept {
  switch (data.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    default: return "array";
  }
}

namespace {

bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '-';
}

class LineParser {
 public:
  LineParser(std::string_view line, std::size_t number) : s_(line), line_(number) {}

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(line_, pos_ + 1, message);
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  bool at_end_or_comment() {
    skip_space();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }
  bool peek(char c) {
    skip_space();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string key() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && is_key_char(s_[pos_])) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  // name(.name)*
  std::string dotted_key() {
    std::string out = key();
    while (peek('.')) {
      ++pos_;
      out += '.' + key();
    }
    return out;
  }

  Value value() {
    skip_space();
    Value v;
    v.line = line_;
    v.column = pos_ + 1;
    if (pos_ >= s_.size()) fail("expected a value");
    const char c = s_[pos_];
    if (c == '"') {
      v.data = string_literal();
    } else if (c == '[') {
      ++pos_;
      Value::Array items;
      if (!peek(']')) {
        for (;;) {
          items.push_back(value());
          if (peek(',')) {
            ++pos_;
            if (peek(']')) break;
            continue;
          }
          break;
        }
      }
      expect(']');
      v.data = std::move(items);
    } else if (s_.substr(pos_, 4) == "true" && !continues(pos_ + 4)) {
      pos_ += 4;
      v.data = true;
    } else if (s_.substr(pos_, 5) == "false" && !continues(pos_ + 5)) {
      pos_ += 5;
      v.data = false;
    } else {
      v.data = std::visit([](auto x) -> decltype(Value::data) { return x; }, number());
    }
    return v;
  }

  std::size_t position() const { return pos_; }

 private:
  bool continues(std::size_t i) const { return i < s_.size() && is_key_char(s_[i]); }

  std::string string_literal() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) break;
        const char e = s_[pos_++];
        switch (e) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          default: --pos_; fail(std::string("unknown escape '\\") + e + "'");
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::variant<std::int64_t, double> number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (is_key_char(s_[pos_]) || s_[pos_] == '.' || s_[pos_] == '+' ||
                                (s_[pos_] == '-'))) {
      ++pos_;
    }
    std::string text(s_.substr(start, pos_ - start));
    text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
    if (text.empty()) {
      pos_ = start;
      fail("expected a value");
    }
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (*first == '+') ++first;
    const bool floating = text.find_first_of(".eE") != std::string::npos;
    if (!floating) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(first, last, i);
      if (ec == std::errc() && p == last) return i;
    } else {
      double d = 0.0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec == std::errc() && p == last && std::isfinite(d)) return d;
    }
    pos_ = start;
    fail("invalid value '" + text + "'");
  }

  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

}  // namespace

Document Document::parse(std::string_view text) {
  Document doc;
  std::string prefix;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number;
    start = end + 1;

    LineParser p(line, number);
    if (p.at_end_or_comment()) {
      if (end == text.size()) break;
      continue;
    }
    if (p.peek('[')) {
      p.expect('[');
      const bool array = p.peek('[');
      if (array) p.expect('[');
      const std::string name = p.dotted_key();
      p.expect(']');
      if (array) p.expect(']');
      if (!p.at_end_or_comment()) p.fail("unexpected text after table header");
      if (array) {
        const std::size_t index = doc.arrays_[name]++;
        prefix = name + "[" + std::to_string(index) + "]";
      } else {
        if (std::find(doc.tables_.begin(), doc.tables_.end(), name) != doc.tables_.end() ||
            doc.arrays_.count(name) != 0) {
          p.fail("table [" + name + "] defined twice");
        }
        prefix = name;
      }
      doc.tables_.push_back(prefix);
    } else {
      const std::size_t key_col = p.position();
      const std::string key = p.key();
      p.expect('=');
      Value v = p.value();
      if (!p.at_end_or_comment()) p.fail("unexpected text after value");
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      if (doc.values_.count(path) != 0) {
        throw ConfigError(number, key_col + 1, "duplicate key '" + path + "'");
      }
      doc.values_.emplace(path, std::move(v));
      doc.order_.push_back(path);
    }
    if (end == text.size()) break;
  }
  return doc;
}

std::optional<Value> Document::take(const std::string& path) {
  auto it = values_.find(path);
  if (it == values_.end()) return std::nullopt;
  Value v = std::move(it->second);
  values_.erase(it);
  return v;
}

std::size_t Document::array_size(const std::string& name) const {
  auto it = arrays_.find(name);
  return it == arrays_.end() ? 0 : it->second;
}

bool Document::has_table(const std::string& name) const {
  if (std::find(tables_.begin(), tables_.end(), name) != tables_.end()) return true;
  const std::string dotted = name + ".";
  for (const auto& [path, v] : values_) {
    if (path.compare(0, dotted.size(), dotted) == 0) return true;
  }
  return false;
}

std::vector<std::string> Document::remaining() const {
  std::vector<std::string> out;
  for (const auto& path : order_) {
    if (values_.count(path) != 0) out.push_back(path);
  }
  return out;
}

namespace {

[[noreturn]] void wrong_type(const std::string& path, const Value& v, std::string_view wanted) {
  throw ConfigError(path, "expected " + std::string(wanted) + ", found " +
                              std::string(v.type_name()) + " (line " + std::to_string(v.line) +
                              ")");
}

}  // namespace

std::optional<std::string> take_string(Document& doc, const std::string& path) {
  auto v = doc.take(path);
  if (!v) return std::nullopt;
  if (auto* s = std::get_if<std::string>(&v->data)) return *s;
  wrong_type(path, *v, "a string");
}

std::optional<double> take_double(Document& doc, const std::string& path) {
  auto v = doc.take(path);
  if (!v) return std::nullopt;
  if (auto* d = std::get_if<double>(&v->data)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v->data)) return static_cast<double>(*i);
  wrong_type(path, *v, "a number");
}

std::optional<std::int64_t> take_int(Document& doc, const std::string& path) {
  auto v = doc.take(path);
  if (!v) return std::nullopt;
  if (auto* i = std::get_if<std::int64_t>(&v->data)) return *i;
  wrong_type(path, *v, "an integer");
}

std::optional<bool> take_bool(Document& doc, const std::string& path) {
  auto v = doc.take(path);
  if (!v) return std::nullopt;
  if (auto* b = std::get_if<bool>(&v->data)) return *b;
  wrong_type(path, *v, "a boolean");
}

std::optional<std::vector<std::int64_t>> take_int_array(Document& doc, const std::string& path) {
  auto v = doc.take(path);
  if (!v) return std::nullopt;
  auto* items = std::get_if<Value::Array>(&v->data);
  if (items == nullptr) wrong_type(path, *v, "an array of integers");
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < items->size(); ++i) {
    auto* n = std::get_if<std::int64_t>(&(*items)[i].data);
    if (n == nullptr) wrong_type(path + "[" + std::to_string(i) + "]", (*items)[i], "an integer");
    out.push_back(*n);
  }
  return out;
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

}  // namespace pinn::app
