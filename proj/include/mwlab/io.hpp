#pragma once

// Flat-file reports: CSV/TSV tables and JSON summaries. Every file is written
// to a temporary name in the target directory and renamed into place.

#include "mwlab/carleson.hpp"
#include "mwlab/convexbody.hpp"
#include "mwlab/maxop.hpp"
#include "mwlab/scalar.hpp"
#include "mwlab/weight.hpp"

#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace mwlab {

using json = nlohmann::json;

const char* code_version();

/// Writes `content` to `path` via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Splits CSV text into rows of fields (no quoting; the lab never writes commas in fields).
std::vector<std::vector<std::string>> parse_csv(const std::string& text, char sep = ',');

/// Weight dump: one row per I in D^{<= maxLevel}.
template <class S>
std::string weight_csv(const MartingaleWeight<S>& W, int maxLevel) {
  std::ostringstream out;
  out << "level,index,m11,m12,m22,alpha,beta,ax,ay\n";
  for (std::uint64_t i = 0; i < count_upto(maxLevel); ++i) {
    Interval I = Interval::from_flat(i);
    Spectral2<S> sp = W.spectral(I);
    SymMat2<S> m = sp.matrix();
    out << I.level << ',' << I.index << ',' << to_string(m.m11) << ',' << to_string(m.m12) << ','
        << to_string(m.m22) << ',' << to_string(sp.alpha) << ',' << to_string(sp.beta) << ','
        << to_string(sp.a.x()) << ',' << to_string(sp.a.y()) << '\n';
  }
  return out.str();
}

template <class S>
struct WeightRow {
  Interval I;
  SymMat2<S> W;
  S alpha, beta;
  Vec2<S> a;
};

template <class S>
std::vector<WeightRow<S>> read_weight_csv(const std::string& text) {
  auto rows = parse_csv(text);
  if (rows.empty() || rows[0].size() != 9 || rows[0][0] != "level") throw DomainError("not a weight dump");
  std::vector<WeightRow<S>> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 9) throw DomainError("weight dump: malformed row " + std::to_string(r));
    WeightRow<S> w;
    w.I = Interval(std::stoi(f[0]), std::stoull(f[1]));
    w.W = SymMat2<S>{parse_scalar<S>(f[2]), parse_scalar<S>(f[3]), parse_scalar<S>(f[4])};
    w.alpha = parse_scalar<S>(f[5]);
    w.beta = parse_scalar<S>(f[6]);
    w.a = Vec2<S>(parse_scalar<S>(f[7]), parse_scalar<S>(f[8]));
    out.push_back(w);
  }
  return out;
}

template <class S>
json zonotope_json(const Zonotope<S>& z) {
  json arr = json::array();
  for (const auto& g : z.generators) arr.push_back({to_double(g.x()), to_double(g.y())});
  return arr;
}

template <class S>
std::string maxfield_tsv(const MaxField<S>& F) {
  std::ostringstream out;
  for (std::size_t k = 0; k < F.values.size(); ++k) out << k << '\t' << to_string(F.values[k]) << '\n';
  return out.str();
}

template <class S>
json maxfield_sidecar(const MaxField<S>& F, double epsilon) {
  return {{"operator", operator_name(F.op)},
          {"truncation", F.truncation},
          {"epsilon", epsilon},
          {"grid_level", F.level},
          {"l2_norm", to_double(l2_norm(F))}};
}

/// Ledger CSV: level,interval,D,F,term,cumulative. Rows come from the
/// enumerated records when present; deeper levels get one aggregate row with
/// interval "n:*" and empty D, F.
template <class S>
std::string ledger_csv(const BlowupLedger<S>& L) {
  std::ostringstream out;
  out << "level,interval,D,F,term,cumulative\n";
  S running(0);
  std::size_t r = 0;
  for (const auto& lv : L.levels) {
    bool any = false;
    while (r < L.records.size() && L.records[r].I.level == lv.level) {
      const auto& rec = L.records[r++];
      running += rec.term;
      out << lv.level << ',' << rec.I.str() << ',' << to_string(rec.D) << ',' << to_string(rec.F) << ','
          << to_string(rec.term) << ',' << to_string(running) << '\n';
      any = true;
    }
    if (!any) {
      running += lv.closed_form;
      out << lv.level << ',' << lv.level << ":*,,," << to_string(lv.closed_form) << ',' << to_string(running) << '\n';
    }
  }
  return out.str();
}

/// Two-column plot data.
template <class X, class Y>
std::string plot_tsv(const std::vector<X>& x, const std::vector<Y>& y) {
  std::ostringstream out;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) out << to_string(x[i]) << '\t' << to_string(y[i]) << '\n';
  return out.str();
}

/// Minimal structural validation of a summary against the published schema:
/// required keys present with the right JSON types. Returns an empty string
/// on success, otherwise the first problem found.
std::string validate_summary(const json& summary, const json& schema);

}  // namespace mwlab
