#include "streamscene/scene_format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <set>
#include <unordered_set>

#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

// Thrown internally; converted to a diagnostic or ParseError by the caller.
struct LineError {
  std::size_t column;
  std::string message;
};

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string_view body = s;
  if (body.front() == '+') body.remove_prefix(1);
  if (body.empty() || body.front() == '+') return std::nullopt;
  // from_chars accepts "inf"/"nan"; the grammar does not.
  for (char c : body) {
    if (!((c >= '0' && c <= '9') || c == '.' || c == '-' || c == 'e' || c == 'E' || c == '+')) {
      return std::nullopt;
    }
  }
  double value = 0;
  const char* end = body.data() + body.size();
  auto [ptr, ec] = std::from_chars(body.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

bool is_bare_word(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ',' || c == '(' || c == ')' || c == '=' || c == '"' || c == '\'' ||
        static_cast<unsigned char>(c) < 0x20) {
      return false;
    }
  }
  return true;
}

std::string_view trim(std::string_view s, std::size_t& offset) {
  std::size_t b = 0;
  while (b < s.size() && is_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && is_space(s[e - 1])) --e;
  offset += b;
  return s.substr(b, e - b);
}

struct LineParse {
  std::string_view id;
  std::size_t id_column;
  std::string_view ctor;
  std::size_t ctor_column;
  std::vector<Token> args;
};

LineParse split_line(std::string_view line) {
  LineParse out;
  std::size_t pos = 0;
  while (pos < line.size() && is_space(line[pos])) ++pos;
  const std::size_t id_begin = pos;
  if (pos >= line.size() || !is_ident_start(line[pos])) {
    throw LineError{pos + 1, "expected record identifier"};
  }
  while (pos < line.size() && is_ident_char(line[pos])) ++pos;
  out.id = line.substr(id_begin, pos - id_begin);
  out.id_column = id_begin + 1;
  while (pos < line.size() && is_space(line[pos])) ++pos;
  if (pos >= line.size() || line[pos] != '=') throw LineError{pos + 1, "expected '='"};
  ++pos;
  while (pos < line.size() && is_space(line[pos])) ++pos;
  const std::size_t ctor_begin = pos;
  while (pos < line.size() && is_ident_char(line[pos])) ++pos;
  if (pos == ctor_begin) throw LineError{pos + 1, "expected constructor name"};
  out.ctor = line.substr(ctor_begin, pos - ctor_begin);
  out.ctor_column = ctor_begin + 1;
  while (pos < line.size() && is_space(line[pos])) ++pos;
  if (pos >= line.size() || line[pos] != '(') throw LineError{pos + 1, "expected '('"};
  ++pos;
  const std::size_t close = line.find(')', pos);
  if (close == std::string_view::npos) throw LineError{line.size() + 1, "expected ')'"};
  for (std::size_t rest = close + 1; rest < line.size(); ++rest) {
    if (!is_space(line[rest])) throw LineError{rest + 1, "unexpected text after ')'"};
  }
  std::string_view inner = line.substr(pos, close - pos);
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = inner.find(',', start);
    const std::size_t stop = comma == std::string_view::npos ? inner.size() : comma;
    std::size_t col = pos + start;
    std::string_view arg = trim(inner.substr(start, stop - start), col);
    if (arg.empty()) throw LineError{col + 1, "empty argument"};
    out.args.push_back({arg, col + 1});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double number_arg(const Token& t) {
  auto v = parse_number(t.text);
  if (!v) throw LineError{t.column, "expected a number, got '" + std::string(t.text) + "'"};
  return *v;
}

std::string word_arg(const Token& t) {
  if (!is_bare_word(t.text)) {
    throw LineError{t.column, "invalid bare word '" + std::string(t.text) + "'"};
  }
  return std::string(t.text);
}

void expect_arity(const LineParse& lp, std::size_t n) {
  if (lp.args.size() != n) {
    throw LineError{lp.ctor_column, std::string(lp.ctor) + " takes " + std::to_string(n) +
                                        " arguments, got " + std::to_string(lp.args.size())};
  }
}

void expect_positive(double v, const Token& t, const char* field) {
  if (!(v > 0)) throw LineError{t.column, std::string(field) + " must be positive"};
}

SceneRecord build_record(const LineParse& lp) {
  const std::string id(lp.id);
  const auto& a = lp.args;
  if (lp.ctor == "Wall") {
    expect_arity(lp, 8);
    WallRec w{id,           number_arg(a[0]), number_arg(a[1]), number_arg(a[2]),
              number_arg(a[3]), number_arg(a[4]), number_arg(a[5]), number_arg(a[6]),
              number_arg(a[7])};
    expect_positive(w.height, a[6], "height");
    expect_positive(w.thickness, a[7], "thickness");
    return w;
  }
  if (lp.ctor == "Door" || lp.ctor == "Window") {
    expect_arity(lp, 6);
    const std::string wall = word_arg(a[0]);
    const double px = number_arg(a[1]), py = number_arg(a[2]), pz = number_arg(a[3]);
    const double width = number_arg(a[4]), height = number_arg(a[5]);
    expect_positive(width, a[4], "width");
    expect_positive(height, a[5], "height");
    if (lp.ctor == "Door") return DoorRec{id, wall, px, py, pz, width, height};
    return WindowRec{id, wall, px, py, pz, width, height};
  }
  if (lp.ctor == "Bbox") {
    expect_arity(lp, 8);
    BboxRec b{id,
              word_arg(a[0]),
              number_arg(a[1]),
              number_arg(a[2]),
              number_arg(a[3]),
              number_arg(a[4]),
              number_arg(a[5]),
              number_arg(a[6]),
              number_arg(a[7])};
    expect_positive(b.scale_x, a[5], "scale_x");
    expect_positive(b.scale_y, a[6], "scale_y");
    expect_positive(b.scale_z, a[7], "scale_z");
    return b;
  }
  throw LineError{lp.ctor_column, "unknown constructor '" + std::string(lp.ctor) + "'"};
}

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  out += buf;
}

double round6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return *parse_number(buf);
}

}  // namespace

UnitConfig UnitConfig::centimeters_degrees() { return {0.01, kDeg}; }
UnitConfig UnitConfig::meters_degrees() { return {1.0, kDeg}; }

const std::string& record_id(const SceneRecord& rec) {
  return std::visit([](const auto& r) -> const std::string& { return r.id; }, rec);
}

std::size_t SceneDescription::bbox_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += std::holds_alternative<BboxRec>(r) ? 1 : 0;
  return n;
}

ParseResult parse_scene_description(std::string_view text, const ParseOptions& options) {
  ParseResult result;
  result.description.units = options.units;
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> walls;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = true;
    for (char c : line) blank = blank && is_space(c);
    if (blank) continue;
    ++result.nonblank_lines;

    try {
      const LineParse lp = split_line(line);
      SceneRecord rec = build_record(lp);
      if (ids.count(std::string(lp.id))) {
        throw LineError{lp.id_column, "duplicate record id '" + std::string(lp.id) + "'"};
      }
      if (options.strict) {
        const std::string* wall_ref = nullptr;
        std::size_t wall_col = 0;
        if (auto* d = std::get_if<DoorRec>(&rec)) wall_ref = &d->wall_id;
        if (auto* w = std::get_if<WindowRec>(&rec)) wall_ref = &w->wall_id;
        if (wall_ref) wall_col = lp.args[0].column;
        if (wall_ref && !walls.count(*wall_ref)) {
          throw LineError{wall_col, "wall_id '" + *wall_ref + "' does not name a parsed wall"};
        }
      }
      ids.insert(std::string(lp.id));
      if (std::holds_alternative<WallRec>(rec)) walls.insert(std::string(lp.id));
      result.description.records.push_back(std::move(rec));
    } catch (const LineError& e) {
      if (options.strict) throw ParseError(line_no, e.column, e.message);
      result.diagnostics.push_back({line_no, e.column, e.message});
    }
  }
  return result;
}

std::string serialize(const SceneDescription& desc) {
  std::string out;
  auto nums = [&out](std::initializer_list<double> vs) {
    for (double v : vs) {
      out += ',';
      append_number(out, v);
    }
  };
  for (const auto& rec : desc.records) {
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          out += r.id;
          if constexpr (std::is_same_v<T, WallRec>) {
            out += "=Wall(";
            append_number(out, r.ax);
            nums({r.ay, r.az, r.bx, r.by, r.bz, r.height, r.thickness});
          } else if constexpr (std::is_same_v<T, DoorRec> || std::is_same_v<T, WindowRec>) {
            out += std::is_same_v<T, DoorRec> ? "=Door(" : "=Window(";
            out += r.wall_id;
            nums({r.position_x, r.position_y, r.position_z, r.width, r.height});
          } else {
            out += "=Bbox(";
            out += r.label;
            nums({r.position_x, r.position_y, r.position_z, r.angle_z, r.scale_x, r.scale_y,
                  r.scale_z});
          }
          out += ")\n";
        },
        rec);
  }
  return out;
}

SceneDescription normalize(const SceneDescription& desc) {
  SceneDescription out = desc;
  for (auto& rec : out.records) {
    std::visit(
        [](auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, WallRec>) {
            for (double* v : {&r.ax, &r.ay, &r.az, &r.bx, &r.by, &r.bz, &r.height, &r.thickness})
              *v = round6(*v);
          } else if constexpr (std::is_same_v<T, BboxRec>) {
            for (double* v : {&r.position_x, &r.position_y, &r.position_z, &r.angle_z, &r.scale_x,
                              &r.scale_y, &r.scale_z})
              *v = round6(*v);
          } else {
            for (double* v : {&r.position_x, &r.position_y, &r.position_z, &r.width, &r.height})
              *v = round6(*v);
          }
        },
        rec);
  }
  return out;
}

BoxConversion to_boxes(const SceneDescription& desc, const CategoryVocabulary& categories) {
  BoxConversion out;
  const double m = desc.units.meters_per_unit;
  const double rad = desc.units.radians_per_unit;
  for (const auto& rec : desc.records) {
    const auto* b = std::get_if<BboxRec>(&rec);
    if (!b) continue;
    const auto id = categories.find(b->label);
    if (!id) {
      ++out.dropped;
      continue;
    }
    out.boxes.emplace_back(categories.name_of(*id),
                           Vec3(b->position_x * m, b->position_y * m, b->position_z * m),
                           Vec3(b->scale_x * m, b->scale_y * m, b->scale_z * m),
                           b->angle_z * rad);
  }
  return out;
}

SceneDescription boxes_to_description(std::span<const OrientedBox3> boxes) {
  SceneDescription out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    out.records.push_back(BboxRec{"bbox_" + std::to_string(i), b.label, b.center.x(),
                                  b.center.y(), b.center.z(), b.yaw, b.dims.x(), b.dims.y(),
                                  b.dims.z()});
  }
  return out;
}

}  // namespace streamscene
