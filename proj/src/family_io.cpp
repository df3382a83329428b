#include "bgwtilt/family_io.hpp"

#include <fstream>
#include <memory>

#include "bgwtilt/casebook.hpp"
#include "bgwtilt/errors.hpp"

namespace bgwtilt {

namespace {

using nlohmann::json;

Rational parse_prob(const json& p, const std::string& where) {
  if (p.is_string()) return parse_rational(p.get<std::string>());
  if (p.is_number()) return parse_rational(p.dump());
  throw InputError(where + ": prob must be a string or a number");
}

int get_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw InputError(where + " must be an integer");
  return v.get<int>();
}

ProjectedFamily parse_analytic(const json& spec, int k) {
  if (!spec.is_object() || !spec.contains("name")) throw InputError("analytic: expected an object with a name");
  const std::string name = spec.at("name").get<std::string>();
  if (name == "appendix_a") {
    if (k != 2) throw InputError("appendix_a has K = 2");
    if (!spec.contains("A") || !spec.contains("eps") || !spec["A"].is_number() || !spec["eps"].is_number())
      throw InputError("appendix_a needs numeric A and eps");
    return appendix_a_family(spec["A"].get<double>(), spec["eps"].get<double>());
  }
  throw InputError("unknown analytic family '" + name + "'");
}

}  // namespace

LoadedFamily parse_family(const json& doc) {
  if (!doc.is_object()) throw InputError("family config must be a JSON object");
  if (!doc.contains("K")) throw InputError("family config needs K");
  const int k = get_int(doc["K"], "K");
  if (k < 1) throw InputError("K must be >= 1");

  if (doc.contains("analytic")) {
    LoadedFamily out{k, std::nullopt, std::nullopt, std::nullopt, parse_analytic(doc["analytic"], k), doc};
    return out;
  }

  if (!doc.contains("types") || !doc["types"].is_array()) throw InputError("family config needs a types array");
  std::vector<ExactOrderedFamily::Law> word_laws(k);
  std::vector<ExactFiniteFamily::Law> count_laws(k);
  std::vector<bool> seen(k, false);
  bool all_words = true;
  for (const auto& entry : doc["types"]) {
    if (!entry.is_object() || !entry.contains("type") || !entry.contains("atoms"))
      throw InputError("each types entry needs type and atoms");
    const int t = get_int(entry["type"], "type");
    if (t < 1 || t > k) throw InputError("type " + std::to_string(t) + " outside 1.." + std::to_string(k));
    if (seen[t - 1]) throw InputError("type " + std::to_string(t) + " listed twice");
    seen[t - 1] = true;
    const std::string where = "type " + std::to_string(t);
    if (!entry["atoms"].is_array() || entry["atoms"].empty()) throw InputError(where + ": atoms must be a nonempty array");
    for (const auto& atom : entry["atoms"]) {
      if (!atom.is_object() || !atom.contains("prob")) throw InputError(where + ": each atom needs prob");
      Rational p = parse_prob(atom["prob"], where);
      if (p < 0) throw InputError(where + ": negative probability");
      Counts counts(k, 0);
      if (atom.contains("word")) {
        if (!atom["word"].is_array()) throw InputError(where + ": word must be an array");
        Word w;
        for (const auto& c : atom["word"]) {
          const int ct = get_int(c, where + " word entry");
          if (ct < 1 || ct > k) throw InputError(where + ": word uses unknown type " + std::to_string(ct));
          w.push_back(ct - 1);
          ++counts[ct - 1];
        }
        word_laws[t - 1].emplace_back(std::move(w), p);
      } else if (atom.contains("counts")) {
        all_words = false;
        const auto& c = atom["counts"];
        if (!c.is_array() || static_cast<int>(c.size()) != k)
          throw InputError(where + ": counts must have " + std::to_string(k) + " entries");
        for (int j = 0; j < k; ++j) {
          counts[j] = get_int(c[j], where + " counts entry");
          if (counts[j] < 0) throw InputError(where + ": negative count");
        }
      } else {
        throw InputError(where + ": atom needs word or counts");
      }
      count_laws[t - 1].emplace_back(std::move(counts), p);
    }
  }
  for (int i = 0; i < k; ++i)
    if (!seen[i]) throw InputError("type " + std::to_string(i + 1) + " has no law");

  ExactFiniteFamily counts(k, std::move(count_laws));
  FiniteFamily approx = to_double(counts);
  LoadedFamily out{k, std::nullopt, counts, std::nullopt, ProjectedFamily(approx), doc};
  if (all_words) {
    out.exact_ordered = ExactOrderedFamily(k, std::move(word_laws));
    out.ordered = to_double(*out.exact_ordered);
  } else {
    out.ordered = canonical_words(approx);
  }
  return out;
}

LoadedFamily load_family(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open family file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("family file '" + path + "': " + e.what());
  }
  return parse_family(doc);
}

json family_to_json(const ExactOrderedFamily& zeta) {
  json types = json::array();
  for (int i = 0; i < zeta.types(); ++i) {
    json atoms = json::array();
    for (const auto& [word, p] : zeta.law(i)) {
      json w = json::array();
      for (int t : word) w.push_back(t + 1);
      atoms.push_back({{"word", w}, {"prob", p.str()}});
    }
    types.push_back({{"type", i + 1}, {"atoms", atoms}});
  }
  return {{"K", zeta.types()}, {"types", types}};
}

}  // namespace bgwtilt
