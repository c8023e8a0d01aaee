#include "levykb/levykb.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "levykb/error.hpp"
#include "levykb/exponents.hpp"
#include "levykb/fourier_density.hpp"
#include "levykb/harness.hpp"
#include "levykb/measure.hpp"
#include "levykb/scales.hpp"

struct lkb_measure {
  levykb::LevyMeasure mu;
};

struct lkb_report {
  levykb::CommandReport rep;
  std::string json;
};

namespace {

thread_local std::string last_error;

template <class F>
lkb_status guard(F&& f) {
  try {
    last_error.clear();
    f();
    return LKB_OK;
  } catch (const levykb::Error& e) {
    last_error = e.what();
    return static_cast<lkb_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown exception";
  }
  return LKB_INTERNAL;
}

void need(bool ok, const char* what) {
  if (!ok) throw levykb::Error(levykb::ErrorCode::InvalidParameters, what);
}

}  // namespace

extern "C" {

const char* lkb_version(void) { return "0.1.0"; }

const char* lkb_status_name(lkb_status s) { return levykb::to_string(static_cast<levykb::ErrorCode>(s)); }

const char* lkb_last_error(void) { return last_error.c_str(); }

lkb_status lkb_measure_create(const char* source, lkb_measure** out) {
  return guard([&] {
    need(source && out, "null argument");
    *out = new lkb_measure{levykb::LevyMeasure(levykb::resolve_spec(source))};
  });
}

void lkb_measure_destroy(lkb_measure* m) { delete m; }

lkb_status lkb_measure_hash(const lkb_measure* m, char* buf, size_t len) {
  return guard([&] {
    need(m && buf, "null argument");
    const std::string h = m->mu.hash();
    need(len > h.size(), "buffer too small");
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

lkb_status lkb_psi(const lkb_measure* m, double xi, double* re, double* im) {
  return guard([&] {
    need(m && re && im, "null argument");
    const auto p = m->mu.psi(xi);
    *re = p.real();
    *im = p.imag();
  });
}

lkb_status lkb_psi_bounds(const lkb_measure* m, double xi, double* psi_l, double* psi_u) {
  return guard([&] {
    need(m && psi_l && psi_u, "null argument");
    *psi_l = levykb::psi_L(m->mu, xi);
    *psi_u = levykb::psi_U(m->mu, xi);
  });
}

lkb_status lkb_rho(const lkb_measure* m, double t, double* out) {
  return guard([&] {
    need(m && out, "null argument");
    *out = levykb::rho(m->mu, t);
  });
}

lkb_status lkb_density(const lkb_measure* m, double t, const double* x, size_t n, int k, double* out) {
  return guard([&] {
    need(m && x && out && n > 0, "null argument or empty grid");
    const levykb::DensityGrid g = levykb::density(m->mu, t, std::vector<double>(x, x + n), k);
    std::memcpy(out, g.values.data(), n * sizeof(double));
  });
}

lkb_status lkb_run_command(const char* command, const char* config_json, lkb_report** out) {
  return guard([&] {
    need(command && out, "null argument");
    nlohmann::json j = nlohmann::json::object();
    if (config_json && *config_json) {
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::exception& e) {
        throw levykb::Error(levykb::ErrorCode::InvalidParameters, std::string("config is not JSON: ") + e.what());
      }
    }
    auto* r = new lkb_report{levykb::run_command(command, levykb::config_from_json(j)), {}};
    r->json = r->rep.report.dump(2);
    *out = r;
  });
}

void lkb_report_destroy(lkb_report* r) { delete r; }

lkb_verdict lkb_report_verdict(const lkb_report* r) {
  if (!r) return LKB_FAIL;
  switch (r->rep.verdict) {
    case levykb::Verdict::Pass: return LKB_PASS;
    case levykb::Verdict::Marginal: return LKB_MARGINAL;
    case levykb::Verdict::Fail: return LKB_FAIL;
  }
  return LKB_FAIL;
}

const char* lkb_report_json(const lkb_report* r) { return r ? r->json.c_str() : ""; }

const char* lkb_report_csv(const lkb_report* r) { return r ? r->rep.csv.c_str() : ""; }

int lkb_report_exit_code(const lkb_report* r) { return r ? levykb::exit_code(r->rep.verdict) : 1; }

}  // extern "C"
