#include "attrsel/attrsel.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "attrsel/baselines.hpp"
#include "attrsel/embedding_io.hpp"
#include "attrsel/error.hpp"
#include "attrsel/interpret.hpp"
#include "attrsel/log.hpp"
#include "attrsel/probe.hpp"
#include "attrsel/projection.hpp"
#include "attrsel/prompts.hpp"
#include "attrsel/selector.hpp"
#include "attrsel/serialize.hpp"
#include "attrsel/synthetic.hpp"

struct as_image_set {
  attrsel::ImageSet v;
};
struct as_attribute_pool {
  attrsel::AttributePool v;
};
struct as_selection {
  attrsel::SelectionResult v;
};
struct as_probe_model {
  attrsel::ProbeModel v;
};

namespace {

using attrsel::ErrorCode;
using attrsel::fail;
using attrsel::require;
using nlohmann::json;

static_assert(static_cast<int>(ErrorCode::NotFound) + 1 == AS_ERR_NOT_FOUND, "status table out of sync");

thread_local std::string g_last_error;

as_status to_status(ErrorCode code) { return static_cast<as_status>(static_cast<int>(code) + 1); }

template <class F>
as_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return AS_OK;
  } catch (const attrsel::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const json::exception& e) {
    g_last_error = std::string("ParseError: ") + e.what();
    return AS_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AS_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return AS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_json(const json& j, char** out) { *out = copy_string(j.dump()); }

json parse_json(const char* text) {
  need(text, "json text");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
}

attrsel::TrainConfig to_config(const as_train_options* o) {
  attrsel::TrainConfig c;
  if (!o) return c;
  c.k = o->k;
  c.lambda = o->lambda;
  c.reg_kind = attrsel::parse_reg_kind(o->reg ? o->reg : "mah");
  c.lr = o->lr;
  c.max_epochs = o->max_epochs;
  c.batch_size = o->batch_size;
  c.seed = o->seed;
  c.val_fraction = o->val_fraction;
  c.eval_every = o->eval_every;
  c.patience = o->patience;
  c.init_mode = attrsel::parse_init_mode(o->init ? o->init : "pool_subset");
  c.init_jitter = o->init_jitter;
  c.adam_beta1 = o->adam_beta1;
  c.adam_beta2 = o->adam_beta2;
  c.adam_eps = o->adam_eps;
  c.ridge_scale = o->ridge_scale;
  return c;
}

attrsel::Matrix copy_rows(const double* rows, std::size_t count, std::size_t dim) {
  need(rows, "rows");
  attrsel::Matrix m(count, dim);
  std::memcpy(m.data().data(), rows, count * dim * sizeof(double));
  return m;
}

}  // namespace

extern "C" {

const char* as_status_name(as_status status) {
  if (status == AS_OK) return "Ok";
  if (status == AS_ERR_INTERNAL) return "Internal";
  if (status > AS_OK && status <= AS_ERR_NOT_FOUND)
    return attrsel::error_code_name(static_cast<ErrorCode>(static_cast<int>(status) - 1));
  return "Unknown";
}

const char* as_last_error_message(void) { return g_last_error.c_str(); }

void as_string_free(char* s) { std::free(s); }

void as_set_quiet(int quiet) {
  if (quiet)
    attrsel::set_log_sink(nullptr);
  else
    attrsel::set_log_sink([](std::string_view msg) { std::clog << "[attrsel] " << msg << '\n'; });
}

as_status as_image_set_load(const char* manifest_path, as_image_set** out) {
  return guard([&] {
    need(manifest_path, "manifest_path");
    need(out, "out");
    *out = new as_image_set{attrsel::load_image_set(manifest_path)};
  });
}

as_status as_image_set_create(const double* rows, size_t count, size_t dim, const int* labels,
                              const char* const* class_names, size_t class_count, as_image_set** out) {
  return guard([&] {
    need(out, "out");
    need(labels, "labels");
    need(class_names, "class_names");
    attrsel::ImageSet s;
    s.embeddings = attrsel::l2_normalize_rows(copy_rows(rows, count, dim));
    s.labels.assign(labels, labels + count);
    for (std::size_t c = 0; c < class_count; ++c) {
      need(class_names[c], "class name");
      s.class_names.emplace_back(class_names[c]);
    }
    attrsel::check_image_set(s);
    *out = new as_image_set{std::move(s)};
  });
}

as_status as_image_set_save(const as_image_set* images, const char* manifest_path) {
  return guard([&] {
    need(images, "images");
    need(manifest_path, "manifest_path");
    attrsel::save(images->v, manifest_path);
  });
}

void as_image_set_free(as_image_set* images) { delete images; }

size_t as_image_set_count(const as_image_set* images) { return images ? images->v.count() : 0; }
size_t as_image_set_dim(const as_image_set* images) { return images ? images->v.dim() : 0; }
size_t as_image_set_class_count(const as_image_set* images) { return images ? images->v.class_count() : 0; }

as_status as_image_set_label(const as_image_set* images, size_t row, int* out) {
  return guard([&] {
    need(images, "images");
    need(out, "out");
    require(row < images->v.count(), ErrorCode::BadIndex, "row " + std::to_string(row) + " out of range");
    *out = images->v.labels[row];
  });
}

as_status as_image_set_class_name(const as_image_set* images, size_t class_index, const char** out) {
  return guard([&] {
    need(images, "images");
    need(out, "out");
    require(class_index < images->v.class_count(), ErrorCode::BadClass,
            "class " + std::to_string(class_index) + " out of range");
    *out = images->v.class_names[class_index].c_str();
  });
}

as_status as_image_set_class_index(const as_image_set* images, const char* name, size_t* out) {
  return guard([&] {
    need(images, "images");
    need(name, "name");
    need(out, "out");
    *out = images->v.class_index(name);
  });
}

as_status as_pool_load(const char* manifest_path, as_attribute_pool** out) {
  return guard([&] {
    need(manifest_path, "manifest_path");
    need(out, "out");
    *out = new as_attribute_pool{attrsel::load_attribute_pool(manifest_path)};
  });
}

as_status as_pool_create(const double* rows, size_t count, size_t dim, const char* const* names,
                         as_attribute_pool** out) {
  return guard([&] {
    need(out, "out");
    need(names, "names");
    attrsel::AttributePool p;
    p.embeddings = attrsel::l2_normalize_rows(copy_rows(rows, count, dim));
    for (std::size_t i = 0; i < count; ++i) {
      need(names[i], "attribute name");
      p.names.emplace_back(names[i]);
    }
    attrsel::check_attribute_pool(p);
    *out = new as_attribute_pool{std::move(p)};
  });
}

as_status as_pool_save(const as_attribute_pool* pool, const char* manifest_path) {
  return guard([&] {
    need(pool, "pool");
    need(manifest_path, "manifest_path");
    attrsel::save(pool->v, manifest_path);
  });
}

void as_pool_free(as_attribute_pool* pool) { delete pool; }

size_t as_pool_size(const as_attribute_pool* pool) { return pool ? pool->v.size() : 0; }
size_t as_pool_dim(const as_attribute_pool* pool) { return pool ? pool->v.dim() : 0; }

as_status as_pool_name(const as_attribute_pool* pool, size_t index, const char** out) {
  return guard([&] {
    need(pool, "pool");
    need(out, "out");
    require(index < pool->v.size(), ErrorCode::BadIndex, "attribute " + std::to_string(index) + " out of range");
    *out = pool->v.names[index].c_str();
  });
}

as_status as_pool_index_of(const as_attribute_pool* pool, const char* name, size_t* out) {
  return guard([&] {
    need(pool, "pool");
    need(name, "name");
    need(out, "out");
    *out = pool->v.index_of(name);
  });
}

as_status as_validate(const as_image_set* images, const as_attribute_pool* pool, char** report_json) {
  return guard([&] {
    need(images, "images");
    need(pool, "pool");
    need(report_json, "report_json");
    put_json(attrsel::compatibility_to_json(attrsel::validate(images->v, pool->v)), report_json);
  });
}

as_status as_project_save(const as_image_set* images, const as_attribute_pool* pool, const size_t* indices,
                          size_t k, const char* manifest_path) {
  return guard([&] {
    need(images, "images");
    need(pool, "pool");
    need(manifest_path, "manifest_path");
    attrsel::validate(images->v, pool->v);
    if (indices) {
      for (std::size_t j = 0; j < k; ++j)
        require(indices[j] < pool->v.size(), ErrorCode::BadIndex, "index " + std::to_string(indices[j]));
      attrsel::save_score_matrix(
          attrsel::semantic_project(images->v, pool->v, std::span<const std::size_t>(indices, k)), manifest_path);
    } else {
      attrsel::save_score_matrix(attrsel::semantic_project(images->v, pool->v), manifest_path);
    }
  });
}

void as_planted_config_init(as_planted_config* cfg) {
  if (!cfg) return;
  const attrsel::PlantedTaskConfig d;
  *cfg = {d.classes,         d.dim,           d.planted_attrs, d.distractor_attrs, d.train_per_class,
          d.test_per_class,  d.noise_sigma,   d.shared_weight, d.seed};
}

as_status as_synth_planted(const as_planted_config* cfg, as_image_set** train, as_image_set** test,
                           as_attribute_pool** pool, char** info_json) {
  return guard([&] {
    need(cfg, "cfg");
    need(train, "train");
    need(test, "test");
    need(pool, "pool");
    attrsel::PlantedTaskConfig c{cfg->classes,         cfg->dim,           cfg->planted_attrs,
                                 cfg->distractor_attrs, cfg->train_per_class, cfg->test_per_class,
                                 cfg->noise_sigma,     cfg->shared_weight, cfg->seed};
    attrsel::PlantedTask t = attrsel::gen_planted_task(c);
    if (info_json) {
      json config = {{"classes", c.classes},
                     {"dim", c.dim},
                     {"planted_attrs", c.planted_attrs},
                     {"distractor_attrs", c.distractor_attrs},
                     {"train_per_class", c.train_per_class},
                     {"test_per_class", c.test_per_class},
                     {"noise_sigma", c.noise_sigma},
                     {"shared_weight", c.shared_weight},
                     {"seed", c.seed}};
      put_json({{"config", config},
                {"planted_indices", t.planted_indices},
                {"class_attributes", t.class_attributes},
                {"class_weights", t.class_weights}},
               info_json);
    }
    auto tr = std::make_unique<as_image_set>(as_image_set{std::move(t.train)});
    auto te = std::make_unique<as_image_set>(as_image_set{std::move(t.test)});
    auto po = std::make_unique<as_attribute_pool>(as_attribute_pool{std::move(t.pool)});
    *train = tr.release();
    *test = te.release();
    *pool = po.release();
  });
}

as_status as_synth_random_pool(size_t n, size_t dim, uint64_t seed, int orthonormalize, as_attribute_pool** out) {
  return guard([&] {
    need(out, "out");
    *out = new as_attribute_pool{attrsel::gen_random_pool(n, dim, seed, orthonormalize != 0)};
  });
}

as_status as_synth_similar_pool(size_t n, size_t dim, double spread, uint64_t seed, as_attribute_pool** out) {
  return guard([&] {
    need(out, "out");
    *out = new as_attribute_pool{attrsel::gen_similar_pool(n, dim, spread, seed)};
  });
}

void as_train_options_init(as_train_options* opts) {
  if (!opts) return;
  const attrsel::TrainConfig d;
  opts->k = d.k;
  opts->lambda = d.lambda;
  opts->reg = attrsel::reg_kind_name(d.reg_kind);
  opts->lr = d.lr;
  opts->max_epochs = d.max_epochs;
  opts->batch_size = d.batch_size;
  opts->seed = d.seed;
  opts->val_fraction = d.val_fraction;
  opts->eval_every = d.eval_every;
  opts->patience = d.patience;
  opts->init = attrsel::init_mode_name(d.init_mode);
  opts->init_jitter = d.init_jitter;
  opts->adam_beta1 = d.adam_beta1;
  opts->adam_beta2 = d.adam_beta2;
  opts->adam_eps = d.adam_eps;
  opts->ridge_scale = d.ridge_scale;
}

as_status as_select(const as_image_set* images, const as_attribute_pool* pool, const char* method,
                    const as_train_options* opts, int lambda_grid, as_selection** out) {
  return guard([&] {
    need(images, "images");
    need(pool, "pool");
    need(method, "method");
    need(out, "out");
    const attrsel::TrainConfig cfg = to_config(opts);
    attrsel::validate(images->v, pool->v);
    const std::string m = method;
    attrsel::SelectionResult sel;
    if (m == "learned")
      sel = lambda_grid ? attrsel::select_learned_grid(images->v, pool->v, cfg)
                        : attrsel::select_learned(images->v, pool->v, cfg);
    else if (m == "uniform")
      sel = attrsel::select_uniform(pool->v, cfg.k, cfg.seed);
    else if (m == "kmeans")
      sel = attrsel::select_kmeans(pool->v, cfg.k, cfg.seed);
    else if (m == "svd")
      sel = attrsel::select_svd(pool->v, cfg.k);
    else if (m == "similarity")
      sel = attrsel::select_similarity(images->v, pool->v, cfg.k);
    else
      fail(ErrorCode::ConfigError, "unknown method '" + m + "'");
    *out = new as_selection{std::move(sel)};
  });
}

as_status as_selection_from_json(const char* text, as_selection** out) {
  return guard([&] {
    need(out, "out");
    *out = new as_selection{attrsel::selection_from_json(parse_json(text))};
  });
}

as_status as_selection_to_json(const as_selection* selection, char** out) {
  return guard([&] {
    need(selection, "selection");
    need(out, "out");
    put_json(attrsel::selection_to_json(selection->v), out);
  });
}

as_status as_selection_check(const as_selection* selection, const as_attribute_pool* pool) {
  return guard([&] {
    need(selection, "selection");
    need(pool, "pool");
    attrsel::check_selection(selection->v, pool->v);
  });
}

void as_selection_free(as_selection* selection) { delete selection; }

size_t as_selection_k(const as_selection* selection) { return selection ? selection->v.k() : 0; }

as_status as_selection_index(const as_selection* selection, size_t position, size_t* out) {
  return guard([&] {
    need(selection, "selection");
    need(out, "out");
    require(position < selection->v.k(), ErrorCode::BadIndex, "position " + std::to_string(position));
    *out = selection->v.indices[position];
  });
}

as_status as_selection_name(const as_selection* selection, size_t position, const char** out) {
  return guard([&] {
    need(selection, "selection");
    need(out, "out");
    require(position < selection->v.k(), ErrorCode::BadIndex, "position " + std::to_string(position));
    *out = selection->v.names[position].c_str();
  });
}

as_status as_probe_train(const as_image_set* train, const as_image_set* test, const as_attribute_pool* pool,
                         const as_selection* selection, const char* warm_start_json, const as_train_options* opts,
                         as_probe_model** out) {
  return guard([&] {
    need(train, "train");
    need(test, "test");
    need(pool, "pool");
    need(selection, "selection");
    need(out, "out");
    std::optional<attrsel::Head> head;
    if (warm_start_json) head = attrsel::head_from_json(parse_json(warm_start_json));
    attrsel::ProbeModel m = attrsel::probe_selection(train->v, test->v, pool->v, selection->v,
                                                     head ? &*head : nullptr, to_config(opts));
    *out = new as_probe_model{std::move(m)};
  });
}

as_status as_probe_from_json(const char* text, as_probe_model** out) {
  return guard([&] {
    need(out, "out");
    *out = new as_probe_model{attrsel::probe_from_json(parse_json(text))};
  });
}

as_status as_probe_to_json(const as_probe_model* model, char** out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    put_json(attrsel::probe_to_json(model->v), out);
  });
}

void as_probe_free(as_probe_model* model) { delete model; }

as_status as_probe_test_accuracy(const as_probe_model* model, double* out) {
  return guard([&] {
    need(model, "model");
    need(out, "out");
    require(model->v.metrics.test_acc.has_value(), ErrorCode::NotFound, "model has no test accuracy");
    *out = *model->v.metrics.test_acc;
  });
}

as_status as_probe_attribute_position(const as_probe_model* model, const char* name, size_t* out) {
  return guard([&] {
    need(model, "model");
    need(name, "name");
    need(out, "out");
    const auto& names = model->v.selection.names;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) {
        *out = j;
        return;
      }
    }
    fail(ErrorCode::NotFound, std::string("attribute '") + name + "' is not in the probe's selection");
  });
}

as_status as_probe_evaluate(const as_probe_model* model, const as_image_set* images, const as_attribute_pool* pool,
                            double* accuracy) {
  return guard([&] {
    need(model, "model");
    need(images, "images");
    need(pool, "pool");
    need(accuracy, "accuracy");
    attrsel::validate(images->v, pool->v);
    attrsel::check_selection(model->v.selection, pool->v);
    const auto scores = attrsel::semantic_project(images->v, pool->v, model->v.selection.indices);
    *accuracy = attrsel::evaluate(model->v, scores, images->v.labels).accuracy;
  });
}

as_status as_image_probe(const as_image_set* train, const as_image_set* test, size_t k, const as_train_options* opts,
                         char** result_json) {
  return guard([&] {
    need(train, "train");
    need(test, "test");
    need(result_json, "result_json");
    const auto r = attrsel::train_image_probe(train->v, test->v, k, to_config(opts));
    put_json({{"k", r.k},
              {"test_acc", r.test_acc},
              {"train_acc", r.train_acc},
              {"val_acc", r.val_acc},
              {"training", attrsel::report_to_json(r.report)}},
             result_json);
  });
}

as_status as_explain(const as_probe_model* model, const as_image_set* test, const as_attribute_pool* pool,
                     size_t class_index, size_t top_n, char** report_json) {
  return guard([&] {
    need(model, "model");
    need(test, "test");
    need(pool, "pool");
    need(report_json, "report_json");
    attrsel::validate(test->v, pool->v);
    attrsel::check_selection(model->v.selection, pool->v);
    require(class_index < test->v.class_count(), ErrorCode::BadClass, "class " + std::to_string(class_index));
    const auto scores = attrsel::semantic_project(test->v, pool->v, model->v.selection.indices);
    const auto ranked = attrsel::class_importance(model->v, scores, test->v.labels, class_index, top_n);
    json top = json::array();
    for (const auto& r : ranked)
      top.push_back({{"position", r.position}, {"name", r.name}, {"mean_importance", r.mean_importance}});
    put_json({{"class", test->v.class_names[class_index]}, {"class_index", class_index}, {"top", top}}, report_json);
  });
}

as_status as_intervene(const as_probe_model* model, const as_image_set* test, const as_attribute_pool* pool,
                       size_t image, size_t position, double delta, char** report_json) {
  return guard([&] {
    need(model, "model");
    need(test, "test");
    need(pool, "pool");
    need(report_json, "report_json");
    attrsel::validate(test->v, pool->v);
    attrsel::check_selection(model->v.selection, pool->v);
    require(image < test->v.count(), ErrorCode::BadIndex, "image " + std::to_string(image) + " out of range");
    const std::size_t one[] = {image};
    const attrsel::ImageSet single{attrsel::select_rows(test->v.embeddings, one), {test->v.labels[image]},
                                   test->v.class_names};
    const auto scores = attrsel::semantic_project(single, pool->v, model->v.selection.indices);
    const auto r = attrsel::intervene(model->v, scores.scores.row(0), position, delta);
    put_json({{"image", image},
              {"attribute", model->v.selection.names[position]},
              {"position", position},
              {"delta", delta},
              {"label", test->v.labels[image]},
              {"old_pred", r.old_pred},
              {"new_pred", r.new_pred},
              {"flipped", r.old_pred != r.new_pred},
              {"old_logits", r.old_logits},
              {"new_logits", r.new_logits},
              {"logit_delta", r.logit_delta}},
             report_json);
  });
}

as_status as_prompt_instance(const char* class_name, const char* domain, char** out) {
  return guard([&] {
    need(class_name, "class_name");
    need(out, "out");
    std::optional<std::string> d;
    if (domain) d = domain;
    *out = copy_string(attrsel::render_instance(class_name, d));
  });
}

as_status as_prompt_batch(const char* group_name, const char* const* class_names, size_t count, char** out) {
  return guard([&] {
    need(group_name, "group_name");
    need(out, "out");
    std::vector<std::string> names;
    for (std::size_t i = 0; i < count; ++i) {
      need(class_names, "class_names");
      need(class_names[i], "class name");
      names.emplace_back(class_names[i]);
    }
    *out = copy_string(attrsel::render_batch(group_name, names));
  });
}

as_status as_prompt_parse(const char* response_text, char** attributes, int* empty) {
  return guard([&] {
    need(response_text, "response_text");
    need(attributes, "attributes");
    const auto parsed = attrsel::parse_attributes(response_text);
    *attributes = copy_string(attrsel::join_attribute_lines(parsed.attributes));
    if (empty) *empty = parsed.empty_warning ? 1 : 0;
  });
}

}  // extern "C"
