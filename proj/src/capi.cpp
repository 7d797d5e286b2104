#include "bifamp/bifamp.h"

#include <cstring>
#include <string>

#include "pool.hpp"
#include "runner.hpp"

using namespace bifamp;

struct bifamp_instance {
  Instance inst;
};

struct bifamp_result {
  std::string json;
  std::map<std::string, std::string> tables;
  bool converged = true;
};

namespace {

thread_local std::string t_last_error;

bifamp_status fail(bifamp_status code, const std::string& message) {
  t_last_error = message;
  return code;
}

// Exceptions from the core map onto the status codes: config/argument
// problems, numeric failures, and I/O.
template <class F>
bifamp_status guarded(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    return fail(BIFAMP_ERR_CONFIG, e.what());
  } catch (const AmpError& e) {
    return fail(BIFAMP_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(BIFAMP_ERR_NUMERIC, "out of memory");
  } catch (const std::exception& e) {
    std::string what = e.what();
    if (what.find("cannot open") != std::string::npos ||
        what.find("write failed") != std::string::npos ||
        what.find("truncated") != std::string::npos)
      return fail(BIFAMP_ERR_IO, what);
    return fail(BIFAMP_ERR_NUMERIC, what);
  }
}

bifamp_result* make_result(RunOutput&& out) {
  auto* res = new bifamp_result;
  res->json = out.summary.dump(2);
  res->tables = std::move(out.tables);
  res->converged = out.converged;
  return res;
}

}  // namespace

extern "C" {

const char* bifamp_version(void) { return "0.1.0"; }

const char* bifamp_last_error(void) { return t_last_error.c_str(); }

bifamp_status bifamp_set_threads(int n) {
  set_thread_limit(n);
  return BIFAMP_OK;
}

bifamp_status bifamp_generate(const char* config_json, bifamp_instance** out) {
  if (!config_json || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    RunConfig config = RunConfig::parse(config_json);
    if (!config.has_problem)
      throw std::invalid_argument("generate: config needs 'problem'");
    if (config.n < 2) throw std::invalid_argument("generate: config needs 'n' >= 2");
    auto* handle = new bifamp_instance{generate(config.problem, config.n, config.seed)};
    *out = handle;
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_instance_load(const char* path, bifamp_instance** out) {
  if (!path || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    auto* handle = new bifamp_instance{load_instance(path)};
    *out = handle;
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_instance_save(const bifamp_instance* inst, const char* path) {
  if (!inst || !path) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    save_instance(inst->inst, path);
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_instance_info(const bifamp_instance* inst, char** out_json) {
  if (!inst || !out_json) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    nlohmann::json j;
    j["problem"] = inst->inst.problem.to_json();
    j["n"] = inst->inst.n;
    j["seed"] = inst->inst.seed;
    j["m"] = inst->inst.m;
    j["p"] = inst->inst.p;
    j["realized_alpha"] = inst->inst.realized_alpha();
    j["realized_pi"] = inst->inst.realized_pi();
    std::string text = j.dump(2);
    char* buf = new char[text.size() + 1];
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_json = buf;
    return BIFAMP_OK;
  });
}

void bifamp_instance_free(bifamp_instance* inst) { delete inst; }

bifamp_status bifamp_amp(const bifamp_instance* inst, const char* config_json,
                         bifamp_result** out) {
  if (!inst || !config_json || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    RunConfig config = RunConfig::parse(config_json);
    *out = make_result(run_amp(inst->inst, config));
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_se(const char* config_json, bifamp_result** out) {
  if (!config_json || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    RunConfig config = RunConfig::parse(config_json);
    *out = make_result(run_se(config));
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_thresholds(const char* config_json, bifamp_result** out) {
  if (!config_json || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    RunConfig config = RunConfig::parse(config_json);
    *out = make_result(run_thresholds(config));
    return BIFAMP_OK;
  });
}

bifamp_status bifamp_phase(const char* config_json, bifamp_result** out) {
  if (!config_json || !out) return fail(BIFAMP_ERR_INVALID, "null argument");
  return guarded([&]() {
    RunConfig config = RunConfig::parse(config_json);
    *out = make_result(run_phase(config));
    return BIFAMP_OK;
  });
}

const char* bifamp_result_json(const bifamp_result* res) {
  return res ? res->json.c_str() : nullptr;
}

const char* bifamp_result_table(const bifamp_result* res, const char* name) {
  if (!res || !name) return nullptr;
  auto it = res->tables.find(name);
  return it == res->tables.end() ? nullptr : it->second.c_str();
}

int bifamp_result_converged(const bifamp_result* res) {
  return res && res->converged ? 1 : 0;
}

void bifamp_result_free(bifamp_result* res) { delete res; }

void bifamp_string_free(char* s) { delete[] s; }

}  // extern "C"
