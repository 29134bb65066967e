#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attrsel/attrsel.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  as_status status;
  std::string message;
};

struct UsageError {
  std::string message;
};

void check(as_status s) {
  if (s != AS_OK) throw Failure{s, as_last_error_message()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ImagesPtr = std::unique_ptr<as_image_set, Deleter<as_image_set, as_image_set_free>>;
using PoolPtr = std::unique_ptr<as_attribute_pool, Deleter<as_attribute_pool, as_pool_free>>;
using SelectionPtr = std::unique_ptr<as_selection, Deleter<as_selection, as_selection_free>>;
using ProbePtr = std::unique_ptr<as_probe_model, Deleter<as_probe_model, as_probe_free>>;

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  as_string_free(s);
  return out;
}

json take_json(char* s) { return json::parse(take(s)); }

ImagesPtr load_images(const std::string& path) {
  as_image_set* p = nullptr;
  check(as_image_set_load(path.c_str(), &p));
  return ImagesPtr(p);
}

PoolPtr load_pool(const std::string& path) {
  as_attribute_pool* p = nullptr;
  check(as_pool_load(path.c_str(), &p));
  return PoolPtr(p);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError{"cannot open " + path};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw UsageError{"cannot write " + path.string()};
}

void write_json(const json& j, const fs::path& path) { write_text(j.dump(2) + "\n", path); }

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ATTRSEL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError{std::string("ATTRSEL_SEED is not an unsigned integer: ") + env};
    }
  }
  return 0;
}

// Flags shared by the training subcommands.
struct TrainFlags {
  std::uint64_t seed = 0;
  double lambda = 0.01;
  std::string reg = "mah";
  std::string init = "pool_subset";
  double lr = 0.01;
  std::size_t max_epochs = 5000;
  std::size_t batch_size = 4096;
  std::size_t patience = 20;
  std::size_t eval_every = 10;
  double val_fraction = 0.1;

  void add_to(CLI::App* cmd, bool with_reg) {
    cmd->add_option("--seed", seed, "random seed (default: $ATTRSEL_SEED or 0)");
    if (with_reg) {
      cmd->add_option("--lambda", lambda, "regularizer weight")->capture_default_str();
      cmd->add_option("--reg", reg, "regularizer")->check(CLI::IsMember({"mah", "cos", "ce"}))->capture_default_str();
      cmd->add_option("--init", init, "dictionary initialization")
          ->check(CLI::IsMember({"pool_subset", "gaussian"}))
          ->capture_default_str();
    }
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--max-epochs", max_epochs)->capture_default_str();
    cmd->add_option("--batch-size", batch_size)->capture_default_str();
    cmd->add_option("--patience", patience, "evaluations without improvement before stopping")->capture_default_str();
    cmd->add_option("--eval-every", eval_every)->capture_default_str();
    cmd->add_option("--val-fraction", val_fraction)->capture_default_str();
  }

  as_train_options options(std::size_t k) const {
    as_train_options o;
    as_train_options_init(&o);
    o.k = k;
    o.seed = seed;
    o.lambda = lambda;
    o.reg = reg.c_str();
    o.init = init.c_str();
    o.lr = lr;
    o.max_epochs = max_epochs;
    o.batch_size = batch_size;
    o.patience = patience;
    o.eval_every = eval_every;
    o.val_fraction = val_fraction;
    return o;
  }

  json to_json(bool with_reg) const {
    json j = {{"seed", seed},         {"lr", lr},           {"max_epochs", max_epochs},
              {"batch_size", batch_size}, {"patience", patience}, {"eval_every", eval_every},
              {"val_fraction", val_fraction}};
    if (with_reg) {
      j["lambda"] = lambda;
      j["reg"] = reg;
      j["init"] = init;
    }
    return j;
  }
};

int run_synth(const std::string& preset, std::uint64_t seed, const std::string& out_dir, const as_planted_config& pc,
              std::size_t n, std::size_t dim, double spread, bool ortho) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  json run = {{"command", "synth"}, {"preset", preset}, {"seed", seed}};
  if (preset == "planted") {
    as_planted_config cfg = pc;
    cfg.seed = seed;
    as_image_set* train = nullptr;
    as_image_set* test = nullptr;
    as_attribute_pool* pool = nullptr;
    char* info = nullptr;
    check(as_synth_planted(&cfg, &train, &test, &pool, &info));
    ImagesPtr tr(train), te(test);
    PoolPtr po(pool);
    json sidecar = take_json(info);
    check(as_image_set_save(tr.get(), (dir / "train.json").c_str()));
    check(as_image_set_save(te.get(), (dir / "test.json").c_str()));
    check(as_pool_save(po.get(), (dir / "pool.json").c_str()));
    sidecar["run"] = run;
    write_json(sidecar, dir / "planted_indices.json");
    std::cout << "wrote " << (dir / "train.json").string() << ", test.json, pool.json, planted_indices.json\n";
    return 0;
  }
  as_attribute_pool* pool = nullptr;
  if (preset == "random") {
    check(as_synth_random_pool(n, dim, seed, ortho ? 1 : 0, &pool));
    run["orthonormalize"] = ortho;
  } else {
    check(as_synth_similar_pool(n, dim, spread, seed, &pool));
    run["spread"] = spread;
  }
  PoolPtr po(pool);
  run["n"] = n;
  run["dim"] = dim;
  check(as_pool_save(po.get(), (dir / "pool.json").c_str()));
  write_json({{"run", run}}, dir / "synth.json");
  std::cout << "wrote " << (dir / "pool.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute selection for concept-bottleneck image classification"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "print training progress");

  std::uint64_t seed = 0;
  TrainFlags train_flags;

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic manifests");
  std::string preset = "planted", out_dir;
  as_planted_config planted;
  as_planted_config_init(&planted);
  std::size_t pool_n = 256, pool_dim = 32;
  double spread = 0.1;
  bool ortho = false;
  synth->add_option("--preset", preset)->check(CLI::IsMember({"planted", "random", "similar"}))->capture_default_str();
  synth->add_option("--seed", seed, "random seed (default: $ATTRSEL_SEED or 0)");
  synth->add_option("--out", out_dir, "output directory")->required();
  synth->add_option("--classes", planted.classes)->capture_default_str();
  synth->add_option("--planted", planted.planted_attrs)->capture_default_str();
  synth->add_option("--distractors", planted.distractor_attrs)->capture_default_str();
  synth->add_option("--train-per-class", planted.train_per_class)->capture_default_str();
  synth->add_option("--test-per-class", planted.test_per_class)->capture_default_str();
  synth->add_option("--noise", planted.noise_sigma)->capture_default_str();
  synth->add_option("--shared-weight", planted.shared_weight)->capture_default_str();
  synth->add_option("--dim", pool_dim, "embedding dimension")->capture_default_str();
  synth->add_option("--n", pool_n, "pool size (random, similar)")->capture_default_str();
  synth->add_option("--spread", spread, "perturbation norm (similar)")->capture_default_str();
  synth->add_flag("--ortho", ortho, "orthonormalize the random pool");

  // select
  auto* select = app.add_subcommand("select", "choose K attributes from a pool");
  std::string images_path, pool_path, method = "learned", out_path;
  std::size_t k = 8;
  bool lambda_grid = false;
  select->add_option("--images", images_path, "image manifest")->required();
  select->add_option("--pool", pool_path, "attribute manifest")->required();
  select->add_option("--method", method)
      ->check(CLI::IsMember({"learned", "kmeans", "uniform", "svd", "similarity"}))
      ->capture_default_str();
  select->add_option("--k", k)->capture_default_str();
  select->add_flag("--lambda-grid", lambda_grid, "search lambda over {1, 0.1, 0.01, 0.001, 0}");
  select->add_option("--out", out_path, "selection JSON")->required();
  train_flags.add_to(select, true);

  // probe
  auto* probe = app.add_subcommand("probe", "train a linear probe on selected attribute scores");
  std::string train_path, test_path, selection_path, warm_path;
  probe->add_option("--train", train_path)->required();
  probe->add_option("--test", test_path)->required();
  probe->add_option("--pool", pool_path)->required();
  probe->add_option("--selection", selection_path)->required();
  probe->add_option("--warm-start", warm_path, "JSON holding a stage-one head");
  probe->add_option("--out", out_path, "probe JSON")->required();
  TrainFlags probe_flags;
  probe_flags.add_to(probe, false);

  // imgprobe
  auto* imgprobe = app.add_subcommand("imgprobe", "two-layer linear probe on raw image features");
  imgprobe->add_option("--train", train_path)->required();
  imgprobe->add_option("--test", test_path)->required();
  imgprobe->add_option("--k", k, "intermediate width")->capture_default_str();
  imgprobe->add_option("--out", out_path)->required();
  TrainFlags img_flags;
  img_flags.add_to(imgprobe, false);

  // explain
  auto* explain = app.add_subcommand("explain", "rank attributes by mean importance for a class");
  std::string probe_path, class_name;
  std::size_t top = 6;
  explain->add_option("--probe", probe_path)->required();
  explain->add_option("--test", test_path)->required();
  explain->add_option("--pool", pool_path)->required();
  explain->add_option("--class", class_name)->required();
  explain->add_option("--top", top)->capture_default_str();
  explain->add_option("--out", out_path);

  // intervene
  auto* intervene = app.add_subcommand("intervene", "shift one attribute score and re-predict");
  std::size_t image = 0;
  std::string attribute;
  double delta = 0.03;
  intervene->add_option("--probe", probe_path)->required();
  intervene->add_option("--test", test_path)->required();
  intervene->add_option("--pool", pool_path)->required();
  intervene->add_option("--image", image, "row in the test manifest")->required();
  intervene->add_option("--attribute", attribute, "attribute name")->required();
  intervene->add_option("--delta", delta)->capture_default_str();
  intervene->add_option("--out", out_path);

  // prompts
  auto* prompts = app.add_subcommand("prompts", "render LLM prompts and parse responses");
  prompts->require_subcommand(1);
  auto* render = prompts->add_subcommand("render", "render an instance or batch prompt");
  std::string domain, group, in_path;
  std::vector<std::string> class_list;
  render->add_option("--class", class_name, "class for the instance prompt");
  render->add_option("--domain", domain, "domain for the instance prompt");
  render->add_option("--group", group, "group name for the batch prompt");
  render->add_option("--classes", class_list, "classes for the batch prompt")->delimiter(',');
  render->add_option("--out", out_path);
  auto* parse = prompts->add_subcommand("parse", "extract bullet attributes from a response");
  parse->add_option("--in", in_path, "response text (default: stdin)");
  parse->add_option("--out", out_path, "newline-delimited attribute list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  as_set_quiet(verbose ? 0 : 1);

  try {
    const std::uint64_t env_seed = default_seed();
    auto seed_of = [&](CLI::App* cmd, std::uint64_t value) { return cmd->count("--seed") ? value : env_seed; };

    if (synth->parsed()) {
      return run_synth(preset, seed_of(synth, seed), out_dir, planted, pool_n, pool_dim, spread, ortho);
    }

    if (select->parsed()) {
      train_flags.seed = seed_of(select, train_flags.seed);
      auto images = load_images(images_path);
      auto pool = load_pool(pool_path);
      const as_train_options opts = train_flags.options(k);
      as_selection* sel = nullptr;
      check(as_select(images.get(), pool.get(), method.c_str(), &opts, lambda_grid ? 1 : 0, &sel));
      SelectionPtr holder(sel);
      char* text = nullptr;
      check(as_selection_to_json(sel, &text));
      json j = take_json(text);
      json run = train_flags.to_json(true);
      run.update({{"command", "select"}, {"images", images_path}, {"pool", pool_path}, {"method", method},
                  {"k", k}, {"lambda_grid", lambda_grid}});
      j["run"] = run;
      write_json(j, out_path);
      for (std::size_t i = 0; i < as_selection_k(sel); ++i) {
        const char* name = nullptr;
        check(as_selection_name(sel, i, &name));
        std::cout << name << "\n";
      }
      return 0;
    }

    if (probe->parsed()) {
      probe_flags.seed = seed_of(probe, probe_flags.seed);
      auto train = load_images(train_path);
      auto test = load_images(test_path);
      auto pool = load_pool(pool_path);
      as_selection* sel = nullptr;
      check(as_selection_from_json(read_text(selection_path).c_str(), &sel));
      SelectionPtr sel_holder(sel);
      const std::string warm = warm_path.empty() ? std::string() : read_text(warm_path);
      const as_train_options opts = probe_flags.options(as_selection_k(sel));
      as_probe_model* model = nullptr;
      check(as_probe_train(train.get(), test.get(), pool.get(), sel, warm_path.empty() ? nullptr : warm.c_str(), &opts,
                           &model));
      ProbePtr holder(model);
      char* text = nullptr;
      check(as_probe_to_json(model, &text));
      json j = take_json(text);
      json run = probe_flags.to_json(false);
      run.update({{"command", "probe"}, {"train", train_path}, {"test", test_path}, {"pool", pool_path},
                  {"selection", selection_path}, {"warm_start", warm_path}});
      j["run"] = run;
      write_json(j, out_path);
      double acc = 0.0;
      check(as_probe_test_accuracy(model, &acc));
      std::cout << "test accuracy: " << acc << "\n";
      return 0;
    }

    if (imgprobe->parsed()) {
      img_flags.seed = seed_of(imgprobe, img_flags.seed);
      auto train = load_images(train_path);
      auto test = load_images(test_path);
      const as_train_options opts = img_flags.options(k);
      char* text = nullptr;
      check(as_image_probe(train.get(), test.get(), k, &opts, &text));
      json j = take_json(text);
      json run = img_flags.to_json(false);
      run.update({{"command", "imgprobe"}, {"train", train_path}, {"test", test_path}, {"k", k}});
      j["config"] = run;
      j["seed"] = img_flags.seed;
      write_json(j, out_path);
      std::cout << "test accuracy: " << j.at("test_acc").get<double>() << "\n";
      return 0;
    }

    if (explain->parsed()) {
      as_probe_model* model = nullptr;
      check(as_probe_from_json(read_text(probe_path).c_str(), &model));
      ProbePtr holder(model);
      auto test = load_images(test_path);
      auto pool = load_pool(pool_path);
      std::size_t class_index = 0;
      check(as_image_set_class_index(test.get(), class_name.c_str(), &class_index));
      char* text = nullptr;
      check(as_explain(model, test.get(), pool.get(), class_index, top, &text));
      json j = take_json(text);
      j["config"] = {{"command", "explain"}, {"probe", probe_path}, {"test", test_path}, {"pool", pool_path},
                     {"class", class_name}, {"top", top}};
      for (const auto& row : j.at("top"))
        std::cout << row.at("name").get<std::string>() << "\t" << row.at("mean_importance").get<double>() << "\n";
      if (!out_path.empty()) write_json(j, out_path);
      return 0;
    }

    if (intervene->parsed()) {
      as_probe_model* model = nullptr;
      check(as_probe_from_json(read_text(probe_path).c_str(), &model));
      ProbePtr holder(model);
      auto test = load_images(test_path);
      auto pool = load_pool(pool_path);
      std::size_t position = 0;
      check(as_probe_attribute_position(model, attribute.c_str(), &position));
      char* text = nullptr;
      check(as_intervene(model, test.get(), pool.get(), image, position, delta, &text));
      json j = take_json(text);
      j["config"] = {{"command", "intervene"}, {"probe", probe_path}, {"test", test_path}, {"pool", pool_path},
                     {"image", image},        {"attribute", attribute}, {"delta", delta}};
      auto class_of = [&](std::size_t c) {
        const char* name = nullptr;
        check(as_image_set_class_name(test.get(), c, &name));
        return std::string(name);
      };
      const auto old_pred = j.at("old_pred").get<std::size_t>();
      const auto new_pred = j.at("new_pred").get<std::size_t>();
      std::cout << "prediction: " << class_of(old_pred) << " -> " << class_of(new_pred)
                << (old_pred != new_pred ? " (flipped)" : " (unchanged)") << "\n";
      if (!out_path.empty()) write_json(j, out_path);
      return 0;
    }

    if (render->parsed()) {
      char* text = nullptr;
      if (!group.empty() || !class_list.empty()) {
        if (!class_name.empty()) throw UsageError{"use either --class or --group/--classes"};
        std::vector<const char*> names;
        for (const auto& c : class_list) names.push_back(c.c_str());
        check(as_prompt_batch(group.c_str(), names.data(), names.size(), &text));
      } else {
        if (class_name.empty()) throw UsageError{"--class or --group/--classes is required"};
        check(as_prompt_instance(class_name.c_str(), render->count("--domain") ? domain.c_str() : nullptr, &text));
      }
      const std::string prompt = take(text);
      if (out_path.empty())
        std::cout << prompt;
      else
        write_text(prompt, out_path);
      return 0;
    }

    if (parse->parsed()) {
      std::string response;
      if (in_path.empty()) {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        response = ss.str();
      } else {
        response = read_text(in_path);
      }
      char* text = nullptr;
      int empty = 0;
      check(as_prompt_parse(response.c_str(), &text, &empty));
      const std::string lines = take(text);
      if (empty) std::cerr << "warning: no bullet attributes found\n";
      if (out_path.empty())
        std::cout << lines;
      else
        write_text(lines, out_path);
      return 0;
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.status == AS_ERR_DIVERGENCE ? 2 : 1;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
