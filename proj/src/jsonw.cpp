#include <cmath>
#include <cstdio>

#include "mfj/io.hpp"

namespace mfj {

Json Json::object() {
  Json j;
  j.kind_ = Kind::object;
  return j;
}

Json Json::array() {
  Json j;
  j.kind_ = Kind::array;
  return j;
}

Json Json::str(std::string v) {
  Json j;
  j.kind_ = Kind::string;
  j.s_ = std::move(v);
  return j;
}

Json Json::num(double v) {
  Json j;
  j.kind_ = Kind::number;
  j.d_ = v;
  return j;
}

Json Json::integer(std::int64_t v) {
  Json j;
  j.kind_ = Kind::integer;
  j.i_ = v;
  return j;
}

Json Json::boolean(bool v) {
  Json j;
  j.kind_ = Kind::boolean;
  j.b_ = v;
  return j;
}

Json& Json::set(const std::string& key, Json v) {
  require(kind_ == Kind::object, Errc::invalid_argument,
          "json: set() on a non-object");
  for (auto& f : fields_) {
    if (f.first == key) {
      f.second = std::move(v);
      return *this;
    }
  }
  fields_.emplace_back(key, std::move(v));
  return *this;
}

Json& Json::push(Json v) {
  require(kind_ == Kind::array, Errc::invalid_argument,
          "json: push() on a non-array");
  items_.push_back(std::move(v));
  return *this;
}

Json Json::num_array(const std::vector<double>& values) {
  Json j = array();
  for (double v : values) j.push(v);
  return j;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  return out;
}

void Json::emit(std::string& out, int indent, int depth) const {
  const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
  switch (kind_) {
    case Kind::null:
      out += "null";
      break;
    case Kind::boolean:
      out += b_ ? "true" : "false";
      break;
    case Kind::integer: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(i_));
      out += buf;
      break;
    }
    case Kind::number:
      // JSON has no non-finite literals; emit them as strings.
      if (std::isfinite(d_)) {
        out += format_double(d_);
      } else {
        out.push_back('"');
        out += format_double(d_);
        out.push_back('"');
      }
      break;
    case Kind::string:
      out.push_back('"');
      out += json_escape(s_);
      out.push_back('"');
      break;
    case Kind::object: {
      if (fields_.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      for (std::size_t i = 0; i < fields_.size(); ++i) {
        out += pad;
        out.push_back('"');
        out += json_escape(fields_[i].first);
        out += "\": ";
        fields_[i].second.emit(out, indent, depth + 1);
        if (i + 1 < fields_.size()) out.push_back(',');
        out.push_back('\n');
      }
      out += close_pad;
      out.push_back('}');
      break;
    }
    case Kind::array: {
      if (items_.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < items_.size(); ++i) {
        out += pad;
        items_[i].emit(out, indent, depth + 1);
        if (i + 1 < items_.size()) out.push_back(',');
        out.push_back('\n');
      }
      out += close_pad;
      out.push_back(']');
      break;
    }
  }
}

std::string Json::dump(int indent) const {
  std::string out;
  emit(out, indent, 0);
  out.push_back('\n');
  return out;
}

void Json::write(const std::string& path) const {
  write_text_file(path, dump());
}

}  // namespace mfj
