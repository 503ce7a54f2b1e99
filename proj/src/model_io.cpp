#include "mjp/model_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mjp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("model file: " + where + ": " + what);
}

double number(const json& j, const std::string& where, const char* key,
              std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    fail(where, std::string("missing field '") + key + "'");
  }
  if (!j[key].is_number()) fail(where, std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

std::string family_of(const json& j, const std::string& where, const char* key = "family") {
  if (!j.contains(key)) fail(where, std::string("missing field '") + key + "'");
  return j[key].get<std::string>();
}

// state-indexed nonnegative sequence
std::function<double(State)> parse_sequence(const json& j, const std::string& where) {
  const std::string fam = family_of(j, where);
  if (fam == "zero") return [](State) { return 0.0; };
  if (fam == "constant") {
    const double v = number(j, where, "value");
    return [v](State) { return v; };
  }
  if (fam == "affine") {
    const double a = number(j, where, "a");
    const double b = number(j, where, "b");
    return [a, b](State n) { return a + b * static_cast<double>(n); };
  }
  if (fam == "geometric") {
    const double scale = number(j, where, "scale", 1.0);
    const double ratio = number(j, where, "ratio");
    return [scale, ratio](State n) {
      return std::min(scale * std::pow(ratio, static_cast<double>(n)), kRateCap);
    };
  }
  if (fam == "table") {
    if (!j.contains("values") || !j["values"].is_array())
      fail(where, "table family needs a 'values' array");
    std::vector<double> vals = j["values"].get<std::vector<double>>();
    const double dflt = number(j, where, "default", 0.0);
    return [vals, dflt](State n) {
      const auto i = static_cast<std::size_t>(n);
      return i < vals.size() ? vals[i] : dflt;
    };
  }
  fail(where, "unknown sequence family '" + fam + "'");
}

}  // namespace

Modulation parse_modulation(const json& spec) {
  const std::string where = "modulation";
  const std::string fam = family_of(spec, where);
  if (fam == "constant") return Modulation::constant(number(spec, where, "value", 1.0));
  if (fam == "affine") return Modulation::affine(number(spec, where, "b"));
  if (fam == "exponential") return Modulation::exponential(number(spec, where, "b"));
  if (fam == "periodic")
    return Modulation::periodic(number(spec, where, "amplitude"),
                                number(spec, where, "omega"));
  if (fam == "piecewise_constant") {
    if (!spec.contains("knots") || !spec.contains("values"))
      fail(where, "piecewise_constant needs 'knots' and 'values'");
    return Modulation::piecewise(spec["knots"].get<std::vector<double>>(),
                                 spec["values"].get<std::vector<double>>());
  }
  fail(where, "unknown modulation family '" + fam + "'");
}

DriftFunction parse_drift(const json& spec, DriftFunction::Kind kind) {
  const std::string where = "drift";
  const std::string fam = family_of(spec, where, "expr_family");
  std::function<double(State)> h;
  double sup = kInf;
  std::string desc = fam;
  if (fam == "affine_state") {
    const double a = number(spec, where, "a");
    const double b = number(spec, where, "b");
    h = [a, b](State n) { return a + b * static_cast<double>(n); };
    sup = b > 0.0 ? kInf : a;
  } else if (fam == "bounded_geometric") {
    const double a = number(spec, where, "a");
    const double b = number(spec, where, "b");
    const double ratio = number(spec, where, "ratio");
    if (!(ratio > 1.0)) fail(where, "bounded_geometric needs ratio > 1");
    h = [a, b, ratio](State n) { return a - b * std::pow(ratio, -static_cast<double>(n)); };
    sup = a;
  } else if (fam == "constant") {
    const double v = number(spec, where, "value");
    h = [v](State) { return v; };
    sup = v;
  } else {
    fail(where, "unknown drift family '" + fam + "'");
  }

  const double constant = number(spec, where, "constant", 0.0);
  double beta = 0.0;
  if (spec.contains("time_family") && spec["time_family"].is_string() &&
      spec["time_family"].get<std::string>() != "none") {
    if (spec["time_family"].get<std::string>() != "exp_decay")
      fail(where, "unknown time_family");
    beta = number(spec, where, "beta");
    desc += "*exp(-" + std::to_string(beta) + " v)";
  }

  DriftFunction out(
      kind,
      [h, beta](double v, State x) { return h(x) * std::exp(-beta * v); }, constant,
      desc);
  out.with_sup_hint(sup);
  out.declare_time_constant(beta == 0.0);
  if (beta != 0.0) {
    out.with_time_derivative(
        [h, beta](double v, State x) { return -beta * h(x) * std::exp(-beta * v); });
  } else {
    out.with_time_derivative([](double, State) { return 0.0; });
  }
  return out;
}

ModelFile parse_model(const json& doc, const std::string& digest) {
  if (!doc.is_object()) throw ConfigError("model file: top level must be an object");

  StateSpace space;
  if (doc.contains("space")) {
    const json& sp = doc["space"];
    const std::string kind = sp.value("kind", "countable");
    if (kind == "countable")
      space.kind = StateSpace::Kind::Countable;
    else if (kind == "sampler_defined")
      space.kind = StateSpace::Kind::SamplerDefined;
    else
      fail("space", "unknown kind '" + kind + "'");
    space.truncation_default =
        static_cast<State>(number(sp, "space", "truncation_default", 64.0));
    if (space.truncation_default < 1) fail("space", "truncation_default must be >= 1");
  }

  if (!doc.contains("rates")) fail("rates", "missing section");
  const json& rates = doc["rates"];
  const std::string rate_family = family_of(rates, "rates");
  if (rate_family != "birth_death")
    fail("rates", "unknown family '" + rate_family + "' (shipped: birth_death)");
  if (!rates.contains("birth")) fail("rates", "missing 'birth' sequence");
  auto birth = parse_sequence(rates["birth"], "rates.birth");
  auto death = rates.contains("death") ? parse_sequence(rates["death"], "rates.death")
                                       : parse_sequence(json{{"family", "zero"}}, "rates.death");

  Modulation mod = doc.contains("modulation") ? parse_modulation(doc["modulation"])
                                              : Modulation::constant(1.0);

  ModelFile out{build_birth_death(birth, death, mod, doc.value("name", "birth_death"),
                                  space.truncation_default),
                std::nullopt, SetSequence::prefix(), digest, doc};

  if (space.kind == StateSpace::Kind::SamplerDefined)
    fail("space", "sampler_defined spaces are built through the API, not model files");

  if (doc.contains("drift"))
    out.drift = parse_drift(doc["drift"], DriftFunction::Kind::ConditionV);

  if (doc.contains("sets")) {
    const std::string fam = family_of(doc["sets"], "sets");
    if (fam == "prefix")
      out.sets = SetSequence::prefix();
    else if (fam == "all")
      out.sets = SetSequence::all();
    else
      fail("sets", "unknown family '" + fam + "'");
  }
  return out;
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("model file: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ConfigError("model file: '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_model(doc, content_digest(bytes));
}

std::string content_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace mjp
