#include "ioext/sysfile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ioext {

FileSyntaxError::FileSyntaxError(const std::string& origin, int line, int column, const std::string& message,
                                 std::size_t offset)
    : SyntaxError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message, offset),
      line_(line),
      column_(column) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// One `key = value` entry; the value may span several physical lines while a
// bracket is open.
struct Entry {
  std::string section;
  std::string key;
  std::string value;
  std::size_t key_offset = 0;
  // (position in value, file offset) at the start of each joined piece
  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  bool used = false;
};

class Reader {
 public:
  Reader(std::string_view text, std::string origin) : text_(text), origin_(std::move(origin)) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') line_starts_.push_back(i + 1);
  }

  [[noreturn]] void fail_at(std::size_t offset, const std::string& message) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    std::size_t line = static_cast<std::size_t>(it - line_starts_.begin());
    std::size_t col = offset - line_starts_[line - 1] + 1;
    throw FileSyntaxError(origin_, static_cast<int>(line), static_cast<int>(col), message, offset);
  }

  [[noreturn]] void fail(const Entry& e, std::size_t pos_in_value, const std::string& message) const {
    fail_at(file_offset(e, pos_in_value), message);
  }

  [[noreturn]] void fail_key(const Entry& e, const std::string& message) const { fail_at(e.key_offset, message); }

  std::size_t file_offset(const Entry& e, std::size_t pos) const {
    std::size_t off = e.key_offset;
    for (const auto& [vpos, foff] : e.pieces) {
      if (vpos > pos) break;
      off = foff + (pos - vpos);
    }
    return off;
  }

  std::vector<Entry> entries() {
    std::vector<Entry> out;
    std::string section;
    std::size_t line = 0;
    while (line < line_starts_.size()) {
      std::size_t start = line_starts_[line];
      std::string_view raw = physical(line);
      std::string_view body = strip_comment(raw);
      ++line;
      std::string t = trim(body);
      if (t.empty()) continue;
      std::size_t lead = body.find_first_not_of(" \t");
      if (t.front() == '[' && t.find('=') == std::string::npos) {
        if (t.back() != ']') fail_at(start + lead, "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        if (!known_section(section)) fail_at(start + lead + 1, "unknown section [" + section + "]");
        continue;
      }
      auto eq = body.find('=');
      if (eq == std::string_view::npos) fail_at(start + lead, "expected 'key = value'");
      if (section.empty()) fail_at(start + lead, "entry outside of any section");
      Entry e;
      e.section = section;
      e.key = trim(body.substr(0, eq));
      e.key_offset = start + lead;
      if (e.key.empty()) fail_at(start + lead, "missing key");
      std::string_view rest = body.substr(eq + 1);
      std::size_t vlead = rest.find_first_not_of(" \t");
      if (vlead == std::string_view::npos) vlead = rest.size();
      e.pieces.emplace_back(0, start + eq + 1 + vlead);
      e.value = std::string(rest.substr(vlead));
      // Continuation while brackets or parentheses are open.
      while (depth(e.value) > 0 && line < line_starts_.size()) {
        std::string_view next = strip_comment(physical(line));
        std::size_t nlead = next.find_first_not_of(" \t");
        if (nlead == std::string_view::npos) {
          ++line;
          continue;
        }
        e.value += ' ';
        e.pieces.emplace_back(e.value.size(), line_starts_[line] + nlead);
        e.value += std::string(next.substr(nlead));
        ++line;
      }
      if (depth(e.value) != 0) fail_at(e.pieces.front().second, "unbalanced brackets");
      std::size_t end = e.value.find_last_not_of(" \t\r");
      e.value.erase(end == std::string::npos ? 0 : end + 1);
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  std::string_view physical(std::size_t line) const {
    std::size_t b = line_starts_[line];
    std::size_t e = line + 1 < line_starts_.size() ? line_starts_[line + 1] - 1 : text_.size();
    return text_.substr(b, e - b);
  }

  static std::string_view strip_comment(std::string_view s) {
    auto h = s.find('#');
    return h == std::string_view::npos ? s : s.substr(0, h);
  }

  static int depth(const std::string& s) {
    int d = 0;
    for (char c : s) {
      if (c == '[' || c == '(') ++d;
      if (c == ']' || c == ')') --d;
    }
    return d;
  }

  static bool known_section(const std::string& s) {
    static const std::set<std::string> names{"model",    "dims",       "symbols",    "operating_point", "dynamics",
                                             "outputs",  "controller", "trajectory", "simulation"};
    return names.count(s) > 0;
  }

  std::string_view text_;
  std::string origin_;
  std::vector<std::size_t> line_starts_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Builder {
 public:
  Builder(Reader& reader, std::vector<Entry>& entries) : rd_(reader), entries_(entries) {}

  Entry* find(const std::string& section, const std::string& key) {
    Entry* hit = nullptr;
    for (auto& e : entries_) {
      if (e.section != section || e.key != key) continue;
      if (hit) rd_.fail_key(e, "duplicate key '" + key + "' in [" + section + "]");
      hit = &e;
    }
    if (hit) hit->used = true;
    return hit;
  }

  std::vector<Entry*> section(const std::string& name) {
    std::vector<Entry*> out;
    for (auto& e : entries_)
      if (e.section == name) {
        e.used = true;
        out.push_back(&e);
      }
    return out;
  }

  double number(const Entry& e, const std::string& text, std::size_t pos) {
    try {
      return eval_expr(parse_expr(text, SymbolTable()), {});
    } catch (const UndeclaredSymbolError& x) {
      rd_.fail(e, pos + x.offset(), "expected a number, found '" + x.symbol() + "'");
    } catch (const SyntaxError& x) {
      rd_.fail(e, pos + x.offset(), std::string(x.what()).substr(14));
    } catch (const Error& x) {
      rd_.fail(e, pos, x.what());
    }
  }
  double number(const Entry& e) { return number(e, e.value, 0); }

  int integer(const Entry& e) {
    double v = number(e);
    if (v != static_cast<int>(v) || v < 0) rd_.fail(e, 0, "expected a non-negative integer");
    return static_cast<int>(v);
  }

  ExprMatrix matrix(const Entry& e, const SymbolTable& table, std::size_t rows, std::size_t cols) {
    ExprMatrix m;
    try {
      m = parse_matrix(e.value, table);
    } catch (const UndeclaredSymbolError& x) {
      rd_.fail(e, x.offset(), "undeclared symbol '" + x.symbol() + "'");
    } catch (const SyntaxError& x) {
      rd_.fail(e, x.offset(), std::string(x.what()).substr(14));
    }
    if (m.rows() != rows || m.cols() != cols) {
      rd_.fail(e, 0, e.key + " must be " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    return m;
  }

  ExprVector vector(const Entry& e, const SymbolTable& table, std::size_t size) {
    ExprMatrix m;
    try {
      m = parse_matrix(e.value, table);
    } catch (const UndeclaredSymbolError& x) {
      rd_.fail(e, x.offset(), "undeclared symbol '" + x.symbol() + "'");
    } catch (const SyntaxError& x) {
      rd_.fail(e, x.offset(), std::string(x.what()).substr(14));
    }
    if (m.cols() == 1 && m.rows() == size) return m.column_vector(0);
    if (m.rows() == 1 && m.cols() == size) return m.row_vector(0);
    rd_.fail(e, 0, e.key + " must have " + std::to_string(size) + " entries");
  }

  Eigen::MatrixXd numeric_matrix(const Entry& e, int size) {
    if (e.value.find('[') == std::string::npos) return number(e) * Eigen::MatrixXd::Identity(size, size);
    ExprMatrix m = matrix(e, SymbolTable(), static_cast<std::size_t>(size), static_cast<std::size_t>(size));
    return m.evaluate({});
  }

  void check_unused() {
    for (const auto& e : entries_)
      if (!e.used) rd_.fail_key(e, "unknown key '" + e.key + "' in [" + e.section + "]");
  }

  Reader& reader() { return rd_; }

 private:
  Reader& rd_;
  std::vector<Entry>& entries_;
};

int channel_index(const std::string& label, int m1, int m2) {
  // y1[j] or y2[j], 1-based.
  if (label.size() < 5 || label[0] != 'y' || (label[1] != '1' && label[1] != '2') || label[2] != '[' ||
      label.back() != ']')
    return -1;
  int j = 0;
  for (std::size_t i = 3; i + 1 < label.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(label[i]))) return -1;
    j = j * 10 + (label[i] - '0');
  }
  int block = label[1] - '0';
  int limit = block == 1 ? m1 : m2;
  if (j < 1 || j > limit) return -1;
  return block == 1 ? j - 1 : m1 + j - 1;
}

}  // namespace

TrajectoryChannel parse_channel(std::string_view text) {
  std::string t = trim(text);
  auto open = t.find('(');
  if (open == std::string::npos || t.back() != ')') throw SyntaxError("expected kind(arguments)", 0);
  std::string kind = trim(t.substr(0, open));
  std::string args = t.substr(open + 1, t.size() - open - 2);
  auto num = [&](const std::string& s, std::size_t at) {
    try {
      return eval_expr(parse_expr(s, SymbolTable()), {});
    } catch (const SyntaxError& e) {
      throw SyntaxError(std::string(e.what()).substr(14), at + e.offset());
    } catch (const UndeclaredSymbolError& e) {
      throw SyntaxError("expected a number", at + e.offset());
    }
  };
  // Arguments with their offsets in `t`.
  std::vector<std::pair<std::string, std::size_t>> parts;
  std::size_t pos = open + 1;
  for (const auto& raw : [&] {
         std::vector<std::string> v;
         std::stringstream ss(args);
         std::string item;
         while (std::getline(ss, item, ',')) v.push_back(item);
         return v;
       }()) {
    parts.emplace_back(raw, pos);
    pos += raw.size() + 1;
  }
  if (kind == "constant") {
    if (parts.size() != 1) throw SyntaxError("constant takes 1 argument", open);
    return TrajectoryChannel::constant(num(parts[0].first, parts[0].second));
  }
  if (kind == "sinusoid") {
    if (parts.size() != 4) throw SyntaxError("sinusoid takes offset, amplitude, frequency, phase", open);
    double v[4];
    for (int i = 0; i < 4; ++i) v[i] = num(parts[i].first, parts[i].second);
    return TrajectoryChannel::sinusoid(v[0], v[1], v[2], v[3]);
  }
  if (kind == "polynomial") {
    std::vector<double> c;
    for (const auto& [s, at] : parts) c.push_back(num(s, at));
    return TrajectoryChannel::polynomial(std::move(c));
  }
  if (kind == "spline") {
    std::vector<double> knots, values;
    for (const auto& [s, at] : parts) {
      auto colon = s.find(':');
      if (colon == std::string::npos) throw SyntaxError("spline points are written t:value", at);
      knots.push_back(num(s.substr(0, colon), at));
      values.push_back(num(s.substr(colon + 1), at + colon + 1));
    }
    try {
      return TrajectoryChannel::spline(std::move(knots), std::move(values));
    } catch (const Error& e) {
      throw SyntaxError(e.what(), open);
    }
  }
  throw SyntaxError("unknown trajectory kind '" + kind + "'", 0);
}

SystemFile parse_system_file(std::string_view text, const std::string& origin) {
  Reader rd(text, origin);
  std::vector<Entry> entries = rd.entries();
  Builder b(rd, entries);
  SystemFile file;
  SystemModel& m = file.model;

  if (Entry* e = b.find("model", "id")) m.id = e->value;
  if (m.id.empty()) {
    std::string stem = origin.substr(origin.find_last_of('/') + 1);
    m.id = stem.substr(0, stem.find('.'));
  }

  Entry* states = b.find("symbols", "states");
  Entry* inputs = b.find("symbols", "inputs");
  if (!states) rd.fail_at(0, "missing [symbols] states");
  if (!inputs) rd.fail_at(0, "missing [symbols] inputs");
  m.states = split_list(states->value);
  m.inputs = split_list(inputs->value);
  if (Entry* e = b.find("symbols", "extras")) m.extras = split_list(e->value);
  try {
    m.table.add_all(m.states, SymbolKind::kState);
    m.table.add_all(m.inputs, SymbolKind::kInput);
    m.table.add_all(m.extras, SymbolKind::kExtraInput);
  } catch (const Error& x) {
    rd.fail_key(*states, x.what());
  }
  const int n = m.n(), m1 = m.m1(), m2 = m.m2();
  if (Entry* e = b.find("symbols", "singular")) {
    for (const auto& s : split_list(e->value)) {
      if (!m.table.contains(s)) rd.fail(*e, 0, "singular coordinate '" + s + "' is not declared");
      m.singular.insert(s);
    }
  }
  if (Entry* e = b.find("symbols", "angular")) {
    for (const auto& s : split_list(e->value)) {
      int c = channel_index(s, m1, m2);
      if (c < 0) rd.fail(*e, 0, "'" + s + "' is not an output channel (y1[j] or y2[j])");
      m.angular_outputs.insert(c);
    }
  }

  for (auto [key, want] : {std::pair<const char*, int>{"n", n}, {"m1", m1}, {"m2", m2}}) {
    if (Entry* e = b.find("dims", key)) {
      if (b.integer(*e) != want)
        rd.fail(*e, 0, std::string(key) + " = " + e->value + " disagrees with the declared symbols (" +
                           std::to_string(want) + ")");
    }
  }

  for (Entry* e : b.section("operating_point")) {
    if (!m.table.contains(e->key)) rd.fail_key(*e, "operating point for undeclared symbol '" + e->key + "'");
    m.operating_point[e->key] = b.number(*e);
  }

  const auto& T = m.table;
  const auto un = static_cast<std::size_t>(n), u1 = static_cast<std::size_t>(m1), u2 = static_cast<std::size_t>(m2);
  Entry* f = b.find("dynamics", "f");
  if (!f) rd.fail_at(0, "missing [dynamics] f");
  m.f = b.vector(*f, T, un);
  if (Entry* e = b.find("dynamics", "G")) m.G = b.matrix(*e, T, un, u1);
  if (Entry* e = b.find("dynamics", "H")) m.H = b.matrix(*e, T, un, u2);

  Entry* h1 = b.find("outputs", "h1");
  if (!h1) rd.fail_at(0, "missing [outputs] h1");
  m.h1 = b.vector(*h1, T, u1);
  if (Entry* e = b.find("outputs", "h2")) m.h2 = b.vector(*e, T, u2);
  if (Entry* e = b.find("outputs", "Abar1")) m.Abar1 = b.matrix(*e, T, u1, u1);
  if (Entry* e = b.find("outputs", "Abar2")) m.Abar2 = b.matrix(*e, T, u2, u1);
  if (Entry* e = b.find("outputs", "Bbar1")) m.Bbar1 = b.matrix(*e, T, u1, u2);
  if (Entry* e = b.find("outputs", "Bbar2")) m.Bbar2 = b.matrix(*e, T, u2, u2);
  finalize_model(m);
  file.warnings = m.validate();

  if (Entry* e = b.find("controller", "case")) {
    if (e->value == "auto") file.case_hint = CaseHint::kAuto;
    else if (e->value == "1") file.case_hint = CaseHint::kCase1;
    else if (e->value == "2") file.case_hint = CaseHint::kCase2;
    else rd.fail(*e, 0, "case must be auto, 1 or 2");
  }
  if (Entry* e = b.find("controller", "gain")) file.synthesis.default_gain = b.number(*e);
  for (int i = 0;; ++i) {
    Entry* e = b.find("controller", "K" + std::to_string(i));
    if (!e) break;
    file.synthesis.gains.push_back(b.numeric_matrix(*e, m1));
  }

  auto traj = b.section("trajectory");
  if (!traj.empty()) {
    int channels = m1 + m2;
    std::vector<std::optional<TrajectoryChannel>> ch(static_cast<std::size_t>(channels));
    for (Entry* e : traj) {
      int c = channel_index(e->key, m1, m2);
      if (c < 0) rd.fail_key(*e, "'" + e->key + "' is not an output channel (y1[j] or y2[j])");
      if (ch[static_cast<std::size_t>(c)]) rd.fail_key(*e, "duplicate trajectory for " + e->key);
      try {
        ch[static_cast<std::size_t>(c)] = parse_channel(e->value);
      } catch (const SyntaxError& x) {
        rd.fail(*e, x.offset(), std::string(x.what()).substr(14));
      }
    }
    Trajectory tr;
    for (int c = 0; c < channels; ++c) {
      if (!ch[static_cast<std::size_t>(c)]) rd.fail_at(traj.front()->key_offset, "trajectory lacks " + output_label(c, m1));
      tr.channels.push_back(*ch[static_cast<std::size_t>(c)]);
    }
    file.trajectory = std::move(tr);
  }

  SimulationSettings& s = file.simulation;
  if (Entry* e = b.find("simulation", "T")) s.T = b.number(*e);
  if (Entry* e = b.find("simulation", "dt")) s.dt = b.number(*e);
  if (Entry* e = b.find("simulation", "seed")) s.seed = static_cast<std::uint64_t>(b.integer(*e));
  if (Entry* e = b.find("simulation", "jitter")) s.jitter = b.number(*e);
  if (Entry* e = b.find("simulation", "tolerance")) s.tolerance = b.number(*e);
  if (Entry* e = b.find("simulation", "L")) s.L = b.numeric_matrix(*e, m1 + m2);
  if (Entry* e = b.find("simulation", "lock_extra")) {
    if (e->value != "true" && e->value != "false") rd.fail(*e, 0, "expected true or false");
    s.lock_extra = e->value == "true";
  }
  if (Entry* e = b.find("simulation", "x0")) {
    std::size_t pos = 0;
    for (const auto& item : [&] {
           std::vector<std::string> v;
           std::stringstream ss(e->value);
           std::string it;
           while (std::getline(ss, it, ',')) v.push_back(it);
           return v;
         }()) {
      auto eq = item.find('=');
      if (eq == std::string::npos) rd.fail(*e, pos, "x0 entries are written name=value");
      std::string name = trim(item.substr(0, eq));
      if (!m.table.contains(name)) rd.fail(*e, pos, "x0 names undeclared symbol '" + name + "'");
      s.x0[name] = b.number(*e, item.substr(eq + 1), pos + eq + 1);
      pos += item.size() + 1;
    }
  }
  if (!(s.dt > 0.0) || !(s.T >= 0.0)) rd.fail_at(0, "[simulation] needs dt > 0 and T >= 0");
  b.check_unused();
  return file;
}

SystemFile load_system_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system_file(ss.str(), path);
}

Eigen::MatrixXd outer_gain(const SystemFile& file, int channels) {
  if (file.simulation.L) return *file.simulation.L;
  return 5.0 * Eigen::MatrixXd::Identity(channels, channels);
}

SimulationOptions simulation_options(const SystemFile& file, int channels) {
  SimulationOptions o;
  o.T = file.simulation.T;
  o.dt = file.simulation.dt;
  o.x0 = file.simulation.x0;
  o.law.L = outer_gain(file, channels);
  o.seed = file.simulation.seed;
  o.initial_jitter = file.simulation.jitter;
  o.control.lock_extra = file.simulation.lock_extra;
  return o;
}

}  // namespace ioext
