#include "caplab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "caplab/errors.hpp"

namespace caplab {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::optional<double> parse_plain(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct Entry {
  std::string key;
  std::string value;
  std::size_t line;
};

struct Section {
  std::string name;  // "" for the top level
  std::string arg;   // attack label
  std::size_t line = 0;
  std::vector<Entry> entries;
};

// Typed accessors that turn bad values into ParseErrors at the right line.
class Reader {
 public:
  Reader(const std::string& source, const Entry& e, const Section& s) : source_(source), e_(e), s_(s) {}

  [[noreturn]] void fail(const std::string& what) const {
    const std::string where = s_.name.empty() ? std::string() : "[" + s_.name + (s_.arg.empty() ? "" : " " + s_.arg) + "] ";
    throw ParseError(source_, e_.line, where + e_.key + ": " + what);
  }

  double number() const {
    const auto v = parse_number(e_.value);
    if (!v) fail("'" + e_.value + "' is not a number");
    return *v;
  }
  double number_at_least(double lo) const {
    const double v = number();
    if (!(v >= lo)) fail("must be >= " + format(lo) + ", got " + e_.value);
    return v;
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0, got " + e_.value);
    return v;
  }
  std::size_t count(std::size_t min_value = 0) const {
    std::size_t v = 0;
    const auto& s = e_.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) fail("'" + s + "' is not a nonnegative integer");
    if (v < min_value) fail("must be >= " + std::to_string(min_value));
    return v;
  }
  std::uint64_t u64() const {
    std::uint64_t v = 0;
    const auto& s = e_.value;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) fail("'" + s + "' is not a nonnegative integer");
    return v;
  }
  bool boolean() const {
    if (e_.value == "true" || e_.value == "yes" || e_.value == "1") return true;
    if (e_.value == "false" || e_.value == "no" || e_.value == "0") return false;
    fail("expected true or false, got '" + e_.value + "'");
  }
  std::vector<double> numbers(char sep = ',') const {
    std::vector<double> out;
    for (auto part : split_on(e_.value, sep)) {
      const auto v = parse_number(part);
      if (!v) fail("'" + std::string(part) + "' is not a number");
      out.push_back(*v);
    }
    return out;
  }
  const std::string& text() const { return e_.value; }

  template <typename Fn>
  auto guarded(Fn&& fn) const {
    try {
      return fn(e_.value);
    } catch (const ContractViolation& ex) {
      fail(ex.what());
    }
  }

 private:
  static std::string format(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
  const std::string& source_;
  const Entry& e_;
  const Section& s_;
};

std::vector<Section> parse_sections(const std::string& text, const std::string& source) {
  std::vector<Section> sections(1);
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      const auto inner = trim(line.substr(1, line.size() - 2));
      const auto space = inner.find_first_of(" \t");
      Section s;
      s.name = std::string(inner.substr(0, space));
      s.arg = space == std::string_view::npos ? std::string() : std::string(trim(inner.substr(space)));
      s.line = line_no;
      sections.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    Entry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (e.key.empty()) throw ParseError(source, line_no, "missing key before '='");
    for (const Entry& prev : sections.back().entries) {
      if (prev.key == e.key) {
        throw ParseError(source, line_no, "duplicate key '" + e.key + "' (first set on line " +
                                              std::to_string(prev.line) + ")");
      }
    }
    sections.back().entries.push_back(std::move(e));
  }
  return sections;
}

using Handler = std::function<void(const Reader&)>;

void apply(const std::string& source, const Section& section, const std::map<std::string, Handler>& handlers) {
  for (const Entry& e : section.entries) {
    const auto it = handlers.find(e.key);
    if (it == handlers.end()) {
      const std::string where = section.name.empty() ? "top level" : "[" + section.name + "]";
      throw ParseError(source, e.line, "unknown key '" + e.key + "' in " + where);
    }
    it->second(Reader(source, e, section));
  }
}

std::vector<std::vector<double>> parse_centers(const Reader& r) {
  std::vector<std::vector<double>> centers;
  for (auto point : split_on(r.text(), ';')) {
    std::vector<double> c;
    for (auto part : split_on(point, ',')) {
      const auto v = parse_number(part);
      if (!v) r.fail("'" + std::string(part) + "' is not a number");
      c.push_back(*v);
    }
    if (!centers.empty() && c.size() != centers.front().size()) r.fail("centers have different dimensions");
    centers.push_back(std::move(c));
  }
  if (centers.size() < 2) r.fail("need at least two centers");
  return centers;
}

std::optional<InputClip> parse_clip(const Reader& r) {
  if (r.text() == "none") return std::nullopt;
  const auto v = r.numbers();
  if (v.size() != 2 || !(v[0] < v[1])) r.fail("expected 'lo, hi' with lo < hi, or none");
  return InputClip{v[0], v[1]};
}

std::map<std::string, Handler> attack_handlers(AttackConfig& a, bool& epsilon_set) {
  return {
      {"kind", [&](const Reader& r) { a.kind = r.guarded([](const std::string& s) { return parse_attack_kind(s); }); }},
      {"epsilon",
       [&](const Reader& r) {
         a.epsilon = r.number_at_least(0.0);
         epsilon_set = true;
       }},
      {"step_size", [&](const Reader& r) { a.step_size = r.positive(); }},
      {"steps", [&](const Reader& r) { a.steps = r.count(1); }},
      {"random_start", [&](const Reader& r) { a.random_start = r.boolean(); }},
  };
}

}  // namespace

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const auto num = parse_plain(trim(text.substr(0, slash)));
    const auto den = parse_plain(trim(text.substr(slash + 1)));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
  }
  return parse_plain(text);
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig cfg;
  cfg.source = source;
  cfg.name = std::filesystem::path(source).stem().string();
  // Small-data defaults; TrainConfig keeps the larger library defaults.
  cfg.train.polytope.budget.epsilon = 0.1;
  cfg.train.polytope.eta = 0.02;
  cfg.train.polytope.steps = 10;
  cfg.train.epochs = 100;
  cfg.train.batch_size = 32;
  cfg.train.lr = 0.05;
  cfg.train.lr_drops = {};
  cfg.train.attack = AttackConfig{AttackKind::pgd, 0.1, 0.025, 10, true, std::nullopt, 0};

  bool train_attack_eps_set = false;
  std::vector<bool> attack_eps_set;
  std::set<std::string> seen_sections;

  const auto sections = parse_sections(text, source);
  for (const Section& s : sections) {
    if (s.name != "attack") {
      if (!s.arg.empty()) throw ParseError(source, s.line, "section [" + s.name + "] takes no label");
      if (!s.name.empty() && !seen_sections.insert(s.name).second) {
        throw ParseError(source, s.line, "duplicate section [" + s.name + "]");
      }
    }
    if (s.name.empty()) {
      apply(source, s,
            {{"name", [&](const Reader& r) { cfg.name = r.text(); }},
             {"seed", [&](const Reader& r) { cfg.seed = r.u64(); }},
             {"out", [&](const Reader& r) { cfg.out = r.text(); }},
             {"threads", [&](const Reader& r) { cfg.threads = r.count(); }}});
    } else if (s.name == "data") {
      DataSpec& d = cfg.data;
      apply(source, s,
            {{"kind",
              [&](const Reader& r) {
                if (r.text() != "blobs" && r.text() != "moons" && r.text() != "csv") {
                  r.fail("expected blobs, moons or csv, got '" + r.text() + "'");
                }
                d.kind = r.text();
              }},
             {"n_per_class", [&](const Reader& r) { d.n_per_class = r.count(1); }},
             {"centers", [&](const Reader& r) { d.centers = parse_centers(r); }},
             {"sigma", [&](const Reader& r) { d.sigma = r.positive(); }},
             {"noise", [&](const Reader& r) { d.noise = r.number_at_least(0.0); }},
             {"path", [&](const Reader& r) { d.path = r.text(); }},
             {"label_column", [&](const Reader& r) { d.label_column = r.text(); }},
             {"header", [&](const Reader& r) { d.header = r.boolean(); }},
             {"scaling",
              [&](const Reader& r) {
                if (r.text() == "none") {
                  d.scaling = FeatureScaling::none;
                } else if (r.text() == "minmax") {
                  d.scaling = FeatureScaling::minmax_to_unit;
                } else {
                  r.fail("expected none or minmax");
                }
              }},
             {"classes", [&](const Reader& r) { d.classes = r.count(1); }},
             {"train_fraction",
              [&](const Reader& r) {
                const double f = r.number();
                if (!(f > 0.0 && f < 1.0)) r.fail("must lie strictly between 0 and 1");
                d.train_fraction = f;
              }},
             {"input_clip", [&](const Reader& r) { d.input_clip = parse_clip(r); }}});
    } else if (s.name == "model") {
      apply(source, s,
            {{"hidden",
              [&](const Reader& r) {
                cfg.model.hidden.clear();
                if (r.text() == "none") return;
                for (double w : r.numbers()) {
                  if (w < 1 || w != std::floor(w)) r.fail("widths must be positive integers");
                  cfg.model.hidden.push_back(static_cast<std::size_t>(w));
                }
              }},
             {"activation", [&](const Reader& r) {
                cfg.model.activation = r.guarded([](const std::string& v) { return parse_activation(v); });
              }}});
    } else if (s.name == "train") {
      TrainConfig& t = cfg.train;
      apply(source, s,
            {{"trainer",
              [&](const Reader& r) { t.trainer = r.guarded([](const std::string& v) { return parse_trainer_kind(v); }); }},
             {"lambda", [&](const Reader& r) { t.lambda = r.number_at_least(0.0); }},
             {"epochs", [&](const Reader& r) { t.epochs = r.count(); }},
             {"batch_size", [&](const Reader& r) { t.batch_size = r.count(1); }},
             {"lr", [&](const Reader& r) { t.lr = r.positive(); }},
             {"lr_drops",
              [&](const Reader& r) {
                t.lr_drops.clear();
                if (r.text() == "none") return;
                for (auto item : split_on(r.text(), ',')) {
                  const auto parts = split_on(item, ':');
                  const auto epoch = parts.size() == 2 ? parse_number(parts[0]) : std::nullopt;
                  const auto divisor = parts.size() == 2 ? parse_number(parts[1]) : std::nullopt;
                  if (!epoch || !divisor || *epoch < 0 || *epoch != std::floor(*epoch) || !(*divisor > 0)) {
                    r.fail("expected 'epoch:divisor' pairs, got '" + std::string(item) + "'");
                  }
                  const auto e = static_cast<std::size_t>(*epoch);
                  if (!t.lr_drops.empty() && e <= t.lr_drops.back().epoch) r.fail("epochs must be strictly increasing");
                  t.lr_drops.push_back({e, *divisor});
                }
              }},
             {"momentum",
              [&](const Reader& r) {
                const double m = r.number();
                if (!(m >= 0.0 && m < 1.0)) r.fail("must lie in [0, 1)");
                t.momentum = m;
              }},
             {"weight_decay", [&](const Reader& r) { t.weight_decay = r.number_at_least(0.0); }},
             {"probe_size", [&](const Reader& r) { t.probe_size = r.count(); }}});
    } else if (s.name == "polytope") {
      CornerSearchConfig& p = cfg.train.polytope;
      apply(source, s,
            {{"particles", [&](const Reader& r) { p.n_particles = r.count(1); }},
             {"steps", [&](const Reader& r) { p.steps = r.count(1); }},
             {"eta", [&](const Reader& r) { p.eta = r.positive(); }},
             {"epsilon", [&](const Reader& r) { p.budget.epsilon = r.number_at_least(0.0); }}});
    } else if (s.name == "train_attack") {
      apply(source, s, attack_handlers(cfg.train.attack, train_attack_eps_set));
    } else if (s.name == "attack") {
      if (s.arg.empty()) throw ParseError(source, s.line, "[attack] sections need a label, e.g. [attack pgd20]");
      AttackConfig a{AttackKind::pgd, 0.0, 0.02, 20, true, std::nullopt, 0};
      bool eps_set = false;
      apply(source, s, attack_handlers(a, eps_set));
      cfg.attacks.push_back(a);
      attack_eps_set.push_back(eps_set);
    } else {
      throw ParseError(source, s.line, "unknown section [" + s.name + "]");
    }
  }

  // Attacks default to the corner-search radius; the clip applies everywhere.
  const double eps = cfg.train.polytope.budget.epsilon;
  if (!train_attack_eps_set) cfg.train.attack.epsilon = eps;
  for (std::size_t i = 0; i < cfg.attacks.size(); ++i) {
    if (!attack_eps_set[i]) cfg.attacks[i].epsilon = eps;
  }
  cfg.train.polytope.budget.input_clip = cfg.data.input_clip;
  cfg.train.attack.input_clip = cfg.data.input_clip;
  for (AttackConfig& a : cfg.attacks) a.input_clip = cfg.data.input_clip;
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;

  if (cfg.data.kind == "csv" && cfg.data.path.empty()) throw ParseError(source, 0, "[data] kind = csv needs a path");
  try {
    cfg.train.validate();
    for (const AttackConfig& a : cfg.attacks) a.validate();
  } catch (const ContractViolation& e) {
    throw ParseError(source, 0, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = parse_run_config(buffer.str(), path.string());
  // Relative CSV paths are resolved against the config's directory.
  if (cfg.data.kind == "csv" && std::filesystem::path(cfg.data.path).is_relative()) {
    cfg.data.path = (path.parent_path() / cfg.data.path).string();
  }
  return cfg;
}

}  // namespace caplab
