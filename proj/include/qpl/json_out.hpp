#pragma once

#include <cstdio>
#include <string>
#include <vector>

// Minimal JSON emitter with fixed field order and floats printed with 17
// significant digits, so outputs are byte-stable across runs.

namespace qpl {

class JsonWriter {
 public:
  std::string str() const { return out_; }

  void begin_object() {
    separator();
    out_ += '{';
    fresh_ = true;
  }
  void end_object() {
    out_ += '}';
    fresh_ = false;
  }
  void begin_array() {
    separator();
    out_ += '[';
    fresh_ = true;
  }
  void end_array() {
    out_ += ']';
    fresh_ = false;
  }

  void key(const std::string& k) {
    separator();
    append_string(k);
    out_ += ':';
    fresh_ = true;
  }

  void value(const std::string& s) {
    separator();
    append_string(s);
  }
  void value(const char* s) { value(std::string(s)); }
  void value(double d) {
    separator();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", d);
    out_ += buf;
  }
  void value(long v) {
    separator();
    out_ += std::to_string(v);
  }
  void value(int v) { value(static_cast<long>(v)); }
  void value(unsigned long long v) {
    separator();
    out_ += std::to_string(v);
  }
  void value(bool b) {
    separator();
    out_ += b ? "true" : "false";
  }

  void field(const std::string& k, const std::string& v) {
    key(k);
    value(v);
  }
  void field(const std::string& k, const char* v) {
    key(k);
    value(v);
  }
  void field(const std::string& k, double v) {
    key(k);
    value(v);
  }
  void field(const std::string& k, long v) {
    key(k);
    value(v);
  }
  void field(const std::string& k, int v) {
    key(k);
    value(v);
  }
  void field(const std::string& k, bool v) {
    key(k);
    value(v);
  }

 private:
  void separator() {
    if (!fresh_ && !out_.empty()) {
      char last = out_.back();
      if (last != '{' && last != '[' && last != ':') out_ += ',';
    }
    fresh_ = false;
  }

  void append_string(const std::string& s) {
    out_ += '"';
    for (char c : s) {
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += c;
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  bool fresh_ = true;
};

}  // namespace qpl
