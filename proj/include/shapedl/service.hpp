#pragma once

// HTTP/JSON front end over a Store.

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include "shapedl/store.hpp"

namespace shapedl {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  StoreOptions store;
};

namespace detail {

inline void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler, turning failures into JSON error bodies.
inline void respond(httplib::Response& res, const std::function<Json()>& f, int ok_status = 200) {
  try {
    send_json(res, f(), ok_status);
  } catch (const ApiError& e) {
    send_json(res, {{"error", e.what()}}, e.status());
  } catch (const std::exception& e) {
    send_json(res, {{"error", e.what()}}, 500);
  }
}

inline Json body_json(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw ApiError(400, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

/// Registers every endpoint on the server; the store must outlive it.
inline void install_routes(httplib::Server& svr, Store& store) {
  using detail::respond;
  svr.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return store.health(); });
  });
  svr.Get("/shapes", [&](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return store.shapes(); });
  });
  svr.Post("/shapes", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.add_shape(detail::body_json(req)); }, 201);
  });
  svr.Post("/descriptions", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.add_description(detail::body_json(req)); }, 201);
  });
  svr.Post("/classify", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.classify(detail::body_json(req)); });
  });
  svr.Get("/hierarchy", [&](const httplib::Request&, httplib::Response& res) {
    respond(res, [&] { return store.hierarchy(); });
  });
  svr.Post("/images", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.add_image(detail::body_json(req)); }, 201);
  });
  svr.Post("/images/raster", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.add_raster(req.body, req.get_param_value("id")); }, 201);
  });
  svr.Get(R"(/images/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.image(req.matches[1]); });
  });
  svr.Post("/query", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return store.query(detail::body_json(req)); });
  });
  // JSON {"image_id": ...} names a stored example; any other body is raster bytes.
  svr.Post("/query/by-example", [&](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] {
      const std::string type = req.get_header_value("Content-Type");
      if (type.rfind("application/json", 0) == 0) return store.query_by_example(detail::body_json(req));
      return store.query_by_raster(req.body);
    });
  });
}

/// Blocks until stop is requested, then persists the store. Returns false if
/// the address could not be bound.
inline bool serve(const ServiceConfig& cfg, Store& store, const std::atomic<bool>& stop,
                  const std::function<void(int)>& on_listening = {}) {
  httplib::Server svr;
  // httplib defaults to SO_REUSEPORT, which would let two services share a port.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  install_routes(svr, store);
  const int port = cfg.port == 0 ? svr.bind_to_any_port(cfg.host) : (svr.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1);
  if (port < 0) return false;
  if (on_listening) on_listening(port);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!stop.load() && !done.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    svr.stop();
  });
  svr.listen_after_bind();
  done = true;
  watcher.join();
  store.flush();
  return true;
}

}  // namespace shapedl
