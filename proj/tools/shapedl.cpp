// shapedl: command-line front end for the shape retrieval engine.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "shapedl/evaluation.hpp"
#include "shapedl/service.hpp"
#include "shapedl/store.hpp"
#include "shapedl/synthetic.hpp"

using namespace shapedl;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

Json read_json(const std::string& path) { return parse_json_text(read_file(path), "'" + path + "'"); }

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

void print_results(const Json& results) {
  std::size_t w = 5;
  for (const auto& r : results["results"]) w = std::max(w, r["image_id"].get<std::string>().size());
  std::cout << pad("rank", 5) << pad("image", w + 2) << pad("score", 8);
  for (auto name : kFeatureNames) std::cout << pad(std::string(name), 10);
  std::cout << "mapping\n";
  std::size_t rank = 0;
  for (const auto& r : results["results"]) {
    std::cout << pad(std::to_string(++rank), 5) << pad(r["image_id"].get<std::string>(), w + 2)
              << pad(fixed(r["score"].get<double>()), 8);
    for (auto name : kFeatureNames) std::cout << pad(fixed(r["breakdown"][std::string(name)].get<double>()), 10);
    std::string mapping;
    for (const auto& j : r["mapping"]) mapping += (mapping.empty() ? "" : ",") + std::to_string(j.get<std::size_t>());
    std::cout << mapping << "\n";
  }
}

std::string joined(const Json& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : " ") + id.get<std::string>();
  return out.empty() ? "-" : out;
}

void print_hierarchy(const Json& h) {
  for (const auto& n : h["nodes"]) {
    std::cout << n["id"].get<std::string>();
    if (!n["aliases"].empty()) std::cout << " (= " << joined(n["aliases"]) << ")";
    std::cout << "  parents: " << joined(n["parents"]) << "  images: " << n["images"].size() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite shape description engine: index, query and evaluate segmented images"};
  app.require_subcommand(1);

  StoreOptions store_opt;
  store_opt.data_dir = "shapedl-data";
  std::string config_path, flush = "always";
  bool no_seed = false;
  app.add_option("--store", store_opt.data_dir, "Store directory")->capture_default_str();
  app.add_option("--config", config_path, "Matching parameters (key = value file)");
  app.add_option("--flush", flush, "Persistence policy: always | shutdown")->capture_default_str();
  app.add_flag("--no-seed", no_seed, "Do not seed a new store with the standard shapes");

  std::string file, image_id, gold_path, host = "127.0.0.1";
  bool as_json = false, persist = false, synthetic = false;
  int port = 8080;

  auto* add_shape = app.add_subcommand("add-shape", "Register a basic shape {id, points}");
  add_shape->add_option("file", file, "Shape JSON")->required();

  auto* add_desc = app.add_subcommand("add-description", "Insert a composite description");
  add_desc->add_option("file", file, "Description JSON")->required();

  auto* ingest = app.add_subcommand("ingest", "Store an image (segmented JSON, PNG or PPM)");
  ingest->add_option("file", file, "Image file")->required();
  ingest->add_option("--id", image_id, "Image id for rasters (default: file stem)");

  auto* query = app.add_subcommand("query", "Rank stored images against a description");
  query->add_option("file", file, "Description JSON")->required();
  query->add_flag("--json", as_json, "Print the JSON answer");
  query->add_flag("--persist", persist, "Insert the query into the hierarchy");

  auto* classify = app.add_subcommand("classify", "Show where a description would sit");
  classify->add_option("file", file, "Description JSON")->required();
  classify->add_flag("--json", as_json, "Print JSON");

  auto* hierarchy = app.add_subcommand("hierarchy", "Print the description hierarchy");
  hierarchy->add_flag("--json", as_json, "Print JSON");

  auto* evaluate = app.add_subcommand("evaluate", "Score retrieval against gold rankings");
  evaluate->add_flag("--synthetic", synthetic, "Run the built-in rendered suite");
  evaluate->add_option("--queries", file, "JSON array of query descriptions");
  evaluate->add_option("--gold", gold_path, "Gold rankings JSON");
  evaluate->add_flag("--json", as_json, "Print the JSON report");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--host", host, "Listen address")->capture_default_str();
  serve_cmd->add_option("--port", port, "Listen port (0 picks a free one)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (evaluate->parsed() && !synthetic && (file.empty() || gold_path.empty())) {
    std::cerr << "evaluate: give --synthetic or both --queries and --gold\n";
    return 2;
  }

  try {
    if (!config_path.empty()) store_opt.config_path = config_path;
    store_opt.flush = parse_flush_policy(flush);
    store_opt.seed_shapes = !no_seed;

    if (evaluate->parsed() && synthetic) {
      const MatchConfig cfg = config_path.empty() ? MatchConfig{} : load_config(config_path);
      const ExperimentReport rep = synth::run_synthetic_experiment(cfg);
      std::cout << (as_json ? to_json(rep).dump(2) + "\n" : format_report_table(rep));
      return 0;
    }

    Store store(store_opt);
    if (add_shape->parsed()) {
      const Json r = store.add_shape(read_json(file));
      std::cout << "added shape " << r["id"].get<std::string>() << "\n";
    } else if (add_desc->parsed()) {
      const Json r = store.add_description(read_json(file));
      std::cout << "inserted " << r["id"].get<std::string>() << " at node " << r["node"].get<std::string>()
                << "\n  parents: " << joined(r["parents"]) << "\n  children: " << joined(r["children"]) << "\n";
    } else if (ingest->parsed()) {
      Json r;
      if (std::filesystem::path(file).extension() == ".json") {
        r = store.add_image(read_json(file));
      } else {
        if (image_id.empty()) image_id = std::filesystem::path(file).stem().string();
        r = store.add_raster(read_file(file), image_id);
      }
      std::cout << "stored " << r["id"].get<std::string>() << " (" << r["regions"].get<std::size_t>()
                << " regions), linked at: " << joined(r["links"]) << "\n";
    } else if (query->parsed()) {
      const Json r = store.query({{"description", read_json(file)}, {"persist", persist}});
      if (as_json)
        std::cout << r.dump(2) << "\n";
      else
        print_results(r);
    } else if (classify->parsed()) {
      const Json r = store.classify(read_json(file));
      if (as_json)
        std::cout << r.dump(2) << "\n";
      else
        std::cout << "parents: " << joined(r["parents"]) << "\nchildren: " << joined(r["children"]) << "\n"
                  << "equivalent: " << (r["equivalent"].is_null() ? "-" : r["equivalent"].get<std::string>())
                  << "\n";
    } else if (hierarchy->parsed()) {
      const Json r = store.hierarchy();
      if (as_json)
        std::cout << r.dump(2) << "\n";
      else
        print_hierarchy(r);
    } else if (evaluate->parsed()) {
      const Json qs = read_json(file);
      if (!qs.is_array()) throw ParseError("queries file must hold a JSON array of descriptions");
      const GoldRankings gold = gold_from_json(read_json(gold_path));
      const ExperimentReport rep = store.read([&](const Hierarchy& h) {
        std::vector<CompositeDescription> queries;
        for (const Json& q : qs) queries.push_back(description_from_json(q, h.shapes(), h.config().features));
        std::vector<SegmentedImage> db;
        for (const auto& [id, img] : h.images()) db.push_back(img);
        return run_experiment(queries, db, gold, h.config());
      });
      for (const auto& s : rep.skipped) std::cerr << "warning: no usable gold for query '" << s << "'\n";
      std::cout << (as_json ? to_json(rep).dump(2) + "\n" : format_report_table(rep));
    } else if (serve_cmd->parsed()) {
      ServiceConfig sc{host, port, store_opt};
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const bool ok = serve(sc, store, g_stop, [&](int bound) {
        std::cout << "listening on " << host << ":" << bound << std::endl;
      });
      if (!ok) {
        std::cerr << "serve: cannot bind " << host << ":" << port << "\n";
        return 1;
      }
    }
    // Process exit is the shutdown for one-shot commands.
    if (store_opt.flush == FlushPolicy::OnShutdown && !serve_cmd->parsed()) store.flush();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
