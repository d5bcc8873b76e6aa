#include "smtpguard/message.hpp"

namespace smtpguard {

namespace {

template <typename LineFn>
std::string map_lines(std::string_view text, LineFn fn) {
  std::string out;
  out.reserve(text.size() + text.size() / 16);
  bool at_line_start = true;
  for (char c : text) {
    if (at_line_start) {
      fn(out, c);
    } else {
      out += c;
    }
    at_line_start = c == '\n';
  }
  return out;
}

} // namespace

std::string MailMessage::to_wire() const {
  std::string out;
  for (const auto& [name, value] : headers) {
    out += name;
    out += ": ";
    out += value;
    out += "\r\n";
  }
  out += "\r\n";
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\n' && (i == 0 || body[i - 1] != '\r')) {
      out += '\r';
    }
    out += body[i];
  }
  if (!body.empty() && body.back() != '\n') {
    out += "\r\n";
  }
  return out;
}

std::string dot_stuff(std::string_view body) {
  return map_lines(body, [](std::string& out, char first) {
    if (first == '.') {
      out += '.';
    }
    out += first;
  });
}

std::string dot_unstuff(std::string_view wire) {
  // Only the first character of a line is dropped, so each leading '.'
  // added by dot_stuff is removed exactly once.
  return map_lines(wire, [](std::string& out, char first) {
    if (first != '.') {
      out += first;
    }
  });
}

} // namespace smtpguard
