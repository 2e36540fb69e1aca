#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>

#include "beamlqr/errors.hpp"

namespace beamlqr::csv {

/// 17 significant digits, '.' separator, independent of the global locale.
inline std::string format_double(double v) {
  if (v == 0.0) {
    return "0";  // also folds -0
  }
  char buf[64];
  const auto [end, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (ec != std::errc{}) {
    throw Error("format_double: conversion failed");
  }
  return std::string(buf, end);
}

/// Row-oriented CSV text builder.
class Writer {
 public:
  explicit Writer(std::initializer_list<std::string_view> header) {
    bool first = true;
    for (std::string_view h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }

  explicit Writer(const std::string& header_line) : out_(header_line + "\n") {}

  Writer& field(double v) {
    sep();
    out_ += format_double(v);
    return *this;
  }
  Writer& field(long long v) {
    sep();
    out_ += std::to_string(v);
    return *this;
  }
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(std::string_view s) {
    sep();
    out_ += s;
    return *this;
  }
  void end_row() {
    out_ += '\n';
    row_open_ = false;
  }

  [[nodiscard]] const std::string& str() const { return out_; }

 private:
  void sep() {
    if (row_open_) out_ += ',';
    row_open_ = true;
  }

  std::string out_;
  bool row_open_ = false;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw Error("cannot open " + path + " for writing");
  }
  f << content;
  if (!f) {
    throw Error("failed writing " + path);
  }
}

}  // namespace beamlqr::csv
