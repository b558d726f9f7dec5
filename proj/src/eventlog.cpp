#include "railtrace/eventlog.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace railtrace {

namespace {

bool must_encode(char c) { return c == ';' || c == '@' || c == '%' || c == '\n' || c == '\r'; }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

struct Field {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::string decode_field(const Field& f, std::size_t line, const char* what) {
  try {
    return percent_decode(f.text);
  } catch (const std::invalid_argument& e) {
    throw LogParseError(line, f.column, std::string("bad percent-encoding in ") + what + ": " + e.what());
  }
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::CH:
      return "CH";
    case EventKind::MV:
      return "MV";
    case EventKind::MSG:
      return "MSG";
    case EventKind::NEW:
      return "NEW";
  }
  return "?";
}

std::string percent_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (must_encode(c)) {
      auto u = static_cast<unsigned char>(c);
      out += '%';
      out += kHex[u >> 4];
      out += kHex[u & 0xF];
    } else {
      out += c;
    }
  }
  return out;
}

std::string percent_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '%') {
      if (i + 2 >= text.size()) throw std::invalid_argument("truncated escape at offset " + std::to_string(i));
      int hi = hex_value(text[i + 1]);
      int lo = hex_value(text[i + 2]);
      if (hi < 0 || lo < 0) throw std::invalid_argument("invalid escape at offset " + std::to_string(i));
      char decoded = static_cast<char>(hi * 16 + lo);
      if (!must_encode(decoded)) throw std::invalid_argument("needless escape at offset " + std::to_string(i));
      out += decoded;
      i += 2;
    } else if (must_encode(c)) {
      throw std::invalid_argument("raw reserved character at offset " + std::to_string(i));
    } else {
      out += c;
    }
  }
  return out;
}

std::string serialize(const SimEvent& event) {
  std::string payload = std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StateChange>) {
          return percent_encode(p.state);
        } else if constexpr (std::is_same_v<T, Movement>) {
          return percent_encode(p.node) + ":" + std::to_string(p.velocity_mm_s);
        } else if constexpr (std::is_same_v<T, Message>) {
          std::string s = percent_encode(p.text);
          for (const auto& a : p.anchors) s += "@" + percent_encode(a);
          return s;
        } else {
          if (p.kind.find(':') != std::string::npos)
            throw std::invalid_argument("NEW kind must not contain ':': " + p.kind);
          return percent_encode(p.kind) + ":" + percent_encode(p.node);
        }
      },
      event.payload);
  std::string line(to_string(event.kind()));
  line += ';';
  line += percent_encode(event.subject);
  line += ';';
  line += payload;
  line += ';';
  line += event.time.to_string();
  return line;
}

SimEvent parse_event(std::string_view line, std::size_t line_number) {
  std::vector<Field> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ';') {
      fields.push_back({line.substr(start, i - start), start + 1});
      start = i + 1;
    }
  }
  if (fields.size() != 4)
    throw LogParseError(line_number, 1, "expected 4 fields, found " + std::to_string(fields.size()));

  SimEvent event;
  event.subject = decode_field(fields[1], line_number, "subject");
  try {
    event.time = Rational::parse(fields[3].text);
  } catch (const std::exception& e) {
    throw LogParseError(line_number, fields[3].column, std::string("bad time: ") + e.what());
  }

  const Field& payload = fields[2];
  std::string_view kind = fields[0].text;
  if (kind == "CH") {
    event.payload = StateChange{decode_field(payload, line_number, "state")};
  } else if (kind == "MV") {
    auto colon = payload.text.rfind(':');
    if (colon == std::string_view::npos)
      throw LogParseError(line_number, payload.column, "MV payload must be NODE:VELOCITY");
    Movement mv;
    mv.node = decode_field({payload.text.substr(0, colon), payload.column}, line_number, "node");
    std::string_view digits = payload.text.substr(colon + 1);
    std::size_t vcol = payload.column + colon + 1;
    if (digits.empty() || (digits.size() > 1 && digits.front() == '0'))
      throw LogParseError(line_number, vcol, "malformed velocity");
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), mv.velocity_mm_s);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || mv.velocity_mm_s < 0)
      throw LogParseError(line_number, vcol, "malformed velocity");
    event.payload = std::move(mv);
  } else if (kind == "MSG") {
    Message msg;
    std::size_t pos = 0;
    bool first = true;
    while (true) {
      std::size_t at = payload.text.find('@', pos);
      std::string_view part = payload.text.substr(pos, at == std::string_view::npos ? std::string_view::npos : at - pos);
      Field f{part, payload.column + pos};
      if (first) {
        msg.text = decode_field(f, line_number, "message text");
        first = false;
      } else {
        if (part.empty()) throw LogParseError(line_number, f.column, "empty anchor");
        msg.anchors.push_back(decode_field(f, line_number, "anchor"));
      }
      if (at == std::string_view::npos) break;
      pos = at + 1;
    }
    event.payload = std::move(msg);
  } else if (kind == "NEW") {
    auto colon = payload.text.find(':');
    if (colon == std::string_view::npos)
      throw LogParseError(line_number, payload.column, "NEW payload must be KIND:NODE");
    Creation c;
    c.kind = decode_field({payload.text.substr(0, colon), payload.column}, line_number, "kind");
    c.node = decode_field({payload.text.substr(colon + 1), payload.column + colon + 1}, line_number, "node");
    event.payload = std::move(c);
  } else {
    throw LogParseError(line_number, 1, "unknown event kind '" + std::string(kind) + "'");
  }
  return event;
}

std::string serialize_log(const std::vector<SimEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += serialize(e);
    out += '\n';
  }
  return out;
}

std::vector<SimEvent> parse_log(std::string_view text) {
  std::vector<SimEvent> events;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_number;
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    SimEvent e = parse_event(line, line_number);
    if (!events.empty() && e.time < events.back().time)
      throw LogParseError(line_number, line.rfind(';') + 2,
                          "timestamp regression: " + e.time.to_string() + " after " + events.back().time.to_string());
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<SimEvent> parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_log(buf.str());
}

void write_file(const std::filesystem::path& path, const std::vector<SimEvent>& events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_log(events);
}

}  // namespace railtrace
