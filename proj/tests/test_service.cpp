#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <thread>

#include "shapedl/service.hpp"
#include "shapedl/synthetic.hpp"
#include "support/generators.hpp"

using namespace shapedl;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shapedl_service_" + name);
  fs::remove_all(p);
  return p;
}

// A served store on an ephemeral port; stops and flushes on destruction.
class Running {
 public:
  explicit Running(Store& store) {
    std::promise<int> bound;
    auto port = bound.get_future();
    thread_ = std::thread([&, p = std::move(bound)]() mutable {
      ServiceConfig cfg;
      cfg.port = 0;
      serve(cfg, store, stop_, [&](int port) { p.set_value(port); });
    });
    port_ = port.get();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }
  ~Running() {
    stop_ = true;
    thread_.join();
  }
  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

 private:
  std::atomic<bool> stop_{false};
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

Json post(httplib::Client& c, const std::string& path, const Json& body, int expect) {
  const auto res = c.Post(path, body.dump(), "application/json");
  EXPECT_TRUE(res) << path;
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << ": " << res->body;
  return Json::parse(res->body);
}

Json get(httplib::Client& c, const std::string& path, int expect = 200) {
  const auto res = c.Get(path);
  EXPECT_TRUE(res) << path;
  if (!res) return {};
  EXPECT_EQ(res->status, expect) << path << ": " << res->body;
  return Json::parse(res->body);
}

const ShapeLibrary& library() {
  static const ShapeLibrary lib = [] {
    ShapeLibrary l;
    for (const auto& s : synth::palette_shapes()) l.emplace(s.id(), s);
    return l;
  }();
  return lib;
}

Json description_json(const CompositeDescription& d) { return to_json(d, &library()); }

SegmentedImage named(SegmentedImage img, const std::string& id) {
  img.id = id;
  return img;
}

std::map<std::string, double> result_scores(const Json& answer) {
  std::map<std::string, double> out;
  for (const auto& r : answer["results"]) out[r["image_id"].get<std::string>()] = r["score"].get<double>();
  return out;
}

}  // namespace

TEST(Service, HealthOnFreshStart) {
  Store store;
  Running svc(store);
  const Json h = get(svc.client(), "/health");
  EXPECT_EQ(h["status"], "ok");
  EXPECT_EQ(h["images"], 0);
  EXPECT_EQ(h["descriptions"], shapes::standard_palette().size());
  EXPECT_EQ(get(svc.client(), "/shapes").size(), shapes::standard_palette().size());
}

TEST(Service, EndpointsRoundTrip) {
  gen::Rng rng(121);
  Store store;
  Running svc(store);
  auto& c = svc.client();
  const auto d = synth::random_description(rng, synth::palette_shapes(), 3, "lamp");

  const Json ins = post(c, "/descriptions", description_json(d), 201);
  EXPECT_EQ(ins["node"], "lamp");
  EXPECT_FALSE(ins["parents"].empty());

  const Json img = to_json(named(prototypical_image(d), "proto"), false);
  const Json stored = post(c, "/images", img, 201);
  EXPECT_EQ(stored["regions"], 3);
  EXPECT_TRUE(std::find(stored["links"].begin(), stored["links"].end(), "lamp") != stored["links"].end());

  const Json ans = post(c, "/query", {{"description", description_json(d)}}, 200);
  ASSERT_FALSE(ans["results"].empty());
  EXPECT_EQ(ans["results"][0]["image_id"], "proto");
  EXPECT_NEAR(ans["results"][0]["score"].get<double>(), 1.0, 1e-6);
  EXPECT_TRUE(ans["results"][0].contains("breakdown"));
  EXPECT_EQ(ans["results"][0]["mapping"].size(), 3u);

  const Json cls = post(c, "/classify", description_json(CompositeDescription("again", d.components)), 200);
  EXPECT_EQ(cls["equivalent"], "lamp");

  const Json back = get(c, "/images/proto");
  EXPECT_EQ(back["id"], "proto");
  EXPECT_EQ(back["regions"].size(), 3u);
  EXPECT_TRUE(back["links"].is_array());

  const Json hier = get(c, "/hierarchy");
  EXPECT_EQ(hier["roots"].size(), shapes::standard_palette().size());
  EXPECT_EQ(hier["nodes"].size(), shapes::standard_palette().size() + 1);

  const Json added = post(c, "/shapes", {{"id", "wedge"}, {"points", {{0, 0}, {40, 0}, {0, 15}}}}, 201);
  EXPECT_EQ(added["id"], "wedge");
  EXPECT_EQ(get(c, "/health")["descriptions"], shapes::standard_palette().size() + 2);

  // Query by a stored example finds that example first.
  const Json ex = post(c, "/query/by-example", {{"image_id", "proto"}}, 200);
  ASSERT_FALSE(ex["results"].empty());
  EXPECT_EQ(ex["results"][0]["image_id"], "proto");

  // Persisted queries become descriptions.
  post(c, "/query", {{"description", description_json(CompositeDescription("kept", d.components))}, {"persist", true}},
       200);
  EXPECT_EQ(get(c, "/health")["descriptions"], shapes::standard_palette().size() + 3);
}

TEST(Service, RasterUploadAndQueryByRaster) {
  Store store;
  Running svc(store);
  auto& c = svc.client();
  const auto suite = synth::build_synthetic_suite();
  const std::string png = encode_png(suite.scenes[0].raster);
  const auto res = c.Post("/images/raster?id=scene-1", png, "image/png");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201) << res->body;
  EXPECT_EQ(get(c, "/images/scene-1")["source"], "raster");

  const auto q = c.Post("/query/by-example", encode_ppm(suite.scenes[0].raster), "image/x-portable-pixmap");
  ASSERT_TRUE(q);
  ASSERT_EQ(q->status, 200) << q->body;
  const Json ans = Json::parse(q->body);
  ASSERT_FALSE(ans["results"].empty());
  EXPECT_EQ(ans["results"][0]["image_id"], "scene-1");
  EXPECT_NEAR(ans["results"][0]["score"].get<double>(), 1.0, 1e-6);

  const auto noid = c.Post("/images/raster", png, "image/png");
  ASSERT_TRUE(noid);
  EXPECT_EQ(noid->status, 400);
}

TEST(Service, ErrorStatuses) {
  Store store;
  Running svc(store);
  auto& c = svc.client();

  const auto bad = c.Post("/descriptions", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(Json::parse(bad->body).contains("error"));

  const Json unknown = post(c, "/descriptions", {{"id", "q"}, {"components", {{{"shape", "nope"}}}}}, 400);
  EXPECT_NE(unknown["error"].get<std::string>().find("nope"), std::string::npos);
  post(c, "/query", {{"nothing", 1}}, 400);
  post(c, "/images", {{"id", "a"}, {"regions", Json::array()}}, 400);
  const auto garbage = c.Post("/images/raster?id=x", "not an image", "application/octet-stream");
  ASSERT_TRUE(garbage);
  EXPECT_EQ(garbage->status, 400);

  get(c, "/images/missing", 404);
  post(c, "/query/by-example", {{"image_id", "missing"}}, 404);

  const Json pair = {{"id", "pair"},
                     {"components", {{{"shape", "circle"}}, {{"shape", "bar"}, {"transform", {{"tx", 90}, {"ty", 0}, {"theta", 0}, {"s", 1}}}}}}};
  post(c, "/descriptions", pair, 201);
  post(c, "/descriptions", pair, 409);
  post(c, "/shapes", {{"id", "circle"}, {"points", {{0, 0}, {1, 0}, {0, 1}}}}, 409);

  const Json clash = {{"id", "clash"}, {"components", {{{"shape", "square"}}, {{"shape", "square"}}}}};
  post(c, "/descriptions", clash, 422);
  post(c, "/query", {{"description", clash}}, 422);
  post(c, "/classify", clash, 422);
}

TEST(Service, ConcurrentReadersSeeSnapshots) {
  gen::Rng rng(122);
  const auto shapes = synth::palette_shapes();
  const auto q = synth::random_description(rng, shapes, 2, "q");
  std::vector<SegmentedImage> imgs;
  for (int i = 0; i < 12; ++i) {
    synth::SceneOptions opt;
    opt.drop_probability = 0.3;
    imgs.push_back(synth::random_scene(rng, q, shapes, "img" + std::to_string(10 + i), opt));
  }
  // Expected score of every image that will satisfy q.
  std::map<std::string, double> expected;
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    order[imgs[i].id] = i;
    if (auto m = recognize_approx(q, imgs[i], MatchConfig{})) expected[imgs[i].id] = m->score;
  }
  ASSERT_GE(expected.size(), 3u);

  Store store;
  Running svc(store);
  std::atomic<bool> writing{true};
  std::thread writer([&] {
    httplib::Client c("127.0.0.1", svc.port());
    c.set_read_timeout(60, 0);
    for (const auto& img : imgs) post(c, "/images", to_json(img, true), 201);
    writing = false;
  });
  std::vector<std::thread> readers;
  std::atomic<int> answers{0};
  for (int r = 0; r < 3; ++r)
    readers.emplace_back([&] {
      httplib::Client c("127.0.0.1", svc.port());
      c.set_read_timeout(60, 0);
      do {
        const Json ans = post(c, "/query", {{"description", description_json(q)}}, 200);
        const auto got = result_scores(ans);
        // A snapshot holds some prefix of the inserted images.
        std::size_t last = 0;
        for (const auto& [id, s] : got) {
          ASSERT_TRUE(expected.count(id)) << id;
          EXPECT_NEAR(s, expected.at(id), 1e-9);
          last = std::max(last, order.at(id));
        }
        for (const auto& [id, s] : expected)
          if (order.at(id) < last) EXPECT_TRUE(got.count(id)) << id << " missing from a snapshot";
        ++answers;
      } while (writing);
    });
  writer.join();
  for (auto& t : readers) t.join();
  EXPECT_GE(answers.load(), 3);
  EXPECT_EQ(result_scores(post(svc.client(), "/query", {{"description", description_json(q)}}, 200)), expected);
}

TEST(Service, RestartDurability) {
  gen::Rng rng(123);
  const auto shapes = synth::palette_shapes();
  const auto d = synth::random_description(rng, shapes, 2, "kept");
  for (FlushPolicy policy : {FlushPolicy::EveryWrite, FlushPolicy::OnShutdown}) {
    const fs::path dir = scratch(policy == FlushPolicy::EveryWrite ? "always" : "shutdown");
    StoreOptions opt;
    opt.data_dir = dir.string();
    opt.flush = policy;
    Json before, hierarchy;
    {
      Store store(opt);
      Running svc(store);
      auto& c = svc.client();
      post(c, "/descriptions", description_json(d), 201);
      for (int i = 0; i < 4; ++i)
        post(c, "/images", to_json(synth::random_scene(rng, d, shapes, "img" + std::to_string(i)), true), 201);
      before = post(c, "/query", {{"description", description_json(d)}}, 200);
      hierarchy = get(c, "/hierarchy");
    }
    {
      Store reopened(opt);
      Running svc(reopened);
      EXPECT_EQ(post(svc.client(), "/query", {{"description", description_json(d)}}, 200), before);
      EXPECT_EQ(get(svc.client(), "/hierarchy"), hierarchy);
      EXPECT_EQ(get(svc.client(), "/health")["images"], 4);
    }
    fs::remove_all(dir);
  }
}

TEST(Service, StartupErrors) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  std::ofstream(dir / kStoreFile) << "{\"version\": 1, \"shapes\": [";
  StoreOptions opt;
  opt.data_dir = dir.string();
  EXPECT_THROW(Store{opt}, Error);

  fs::remove_all(dir);
  { Store fresh(opt); }
  const fs::path conf = dir / "other.conf";
  std::ofstream(conf) << "global_similarity_threshold = 0.5\n";
  opt.config_path = conf.string();
  EXPECT_THROW(Store{opt}, ConfigError);
  fs::remove_all(dir);

  EXPECT_THROW(parse_flush_policy("sometimes"), ConfigError);
}

TEST(Service, PortInUseFailsToServe) {
  // A plain listening socket holds the port.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(fd, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(fd, 1), 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);

  Store store;
  ServiceConfig cfg;
  cfg.port = ntohs(addr.sin_port);
  std::atomic<bool> stop{true};
  EXPECT_FALSE(serve(cfg, store, stop));
  ::close(fd);
}

#ifdef SHAPEDL_CLI
TEST(Service, CliAndServiceAgree) {
  gen::Rng rng(124);
  const auto shapes = synth::palette_shapes();
  const fs::path dir = scratch("parity");
  StoreOptions opt;
  opt.data_dir = dir.string();
  const auto d = synth::random_description(rng, shapes, 2, "pair");
  {
    Store store(opt);
    store.add_description(description_json(d));
    for (int i = 0; i < 6; ++i) {
      synth::SceneOptions so;
      so.jitter = 0.04;
      store.add_image(to_json(synth::random_scene(rng, d, shapes, "img" + std::to_string(i), so), true));
    }
  }
  const fs::path qfile = dir / "query.json";
  std::ofstream(qfile) << description_json(CompositeDescription("probe", d.components)).dump();

  std::string out;
  {
    const std::string cmd = std::string(SHAPEDL_CLI) + " --store " + dir.string() + " query --json " + qfile.string();
    FILE* pipe = popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    EXPECT_EQ(pclose(pipe), 0);
  }
  {
    Store store(opt);
    Running svc(store);
    const Json served = post(svc.client(), "/query",
                             {{"description", description_json(CompositeDescription("probe", d.components))}}, 200);
    EXPECT_FALSE(served["results"].empty());
    EXPECT_EQ(Json::parse(out), served);
  }
  fs::remove_all(dir);
}
#endif
