#include "elkb/service.hpp"

#include <atomic>
#include <deque>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"
#include "httplib.h"
#include "nlohmann/json.hpp"

namespace elkb {

using nlohmann::json;

namespace {

json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

// Bounded concurrency gate; callers over the cap wait their turn.
class InflightGate {
 public:
  explicit InflightGate(int cap) : cap_(cap) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return inflight_ < cap_; });
    ++inflight_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --inflight_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int cap_;
  int inflight_ = 0;
};

class LatencyWindow {
 public:
  explicit LatencyWindow(size_t cap) : cap_(cap) {}
  void record(double ms) {
    std::lock_guard lock(mu_);
    ++count_;
    samples_.push_back(ms);
    if (samples_.size() > cap_) samples_.pop_front();
  }
  json stats() const {
    std::vector<double> v;
    uint64_t count;
    {
      std::lock_guard lock(mu_);
      v.assign(samples_.begin(), samples_.end());
      count = count_;
    }
    return {{"count", count},
            {"window", v.size()},
            {"p50_ms", percentile(v, 0.5)},
            {"p95_ms", percentile(v, 0.95)}};
  }

 private:
  mutable std::mutex mu_;
  size_t cap_;
  uint64_t count_ = 0;
  std::deque<double> samples_;
};

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread thread;
  std::shared_ptr<Linker> linker;
  std::atomic<bool> ready{false};
  InflightGate gate;
  LatencyWindow latency;

  explicit Impl(ServiceConfig cfg)
      : config(std::move(cfg)), gate(config.max_inflight), latency(config.latency_window) {
    server.new_task_queue = [] { return new httplib::ThreadPool(16); };
    install_routes();
  }

  void install_routes() {
    server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      if (!ready.load()) {
        res.status = 503;
        res.set_content(json{{"status", "loading"}}.dump(), "application/json");
        return;
      }
      json body = {{"status", "ok"},
                   {"kb_entities", linker->deps().kb->entity_count()},
                   {"index_version", config.index_version}};
      res.set_content(body.dump(), "application/json");
    });

    server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      json body = {{"latency_ms", latency.stats()}};
      res.set_content(body.dump(), "application/json");
    });

    server.Post("/link", [this](const httplib::Request& req, httplib::Response& res) {
      if (!ready.load()) {
        res.status = 503;
        res.set_content(error_body("loading", "service dependencies not loaded").dump(),
                        "application/json");
        return;
      }
      gate.acquire();
      struct Release {
        InflightGate& g;
        ~Release() { g.release(); }
      } release{gate};

      json body;
      try {
        body = json::parse(req.body);
        if (!body.is_object() || !body.contains("text") || !body["text"].is_string())
          throw ValidationError("body must be an object with a string 'text'");
      } catch (const ValidationError& e) {
        res.status = 400;
        res.set_content(error_body("bad_request", e.what()).dump(), "application/json");
        return;
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(error_body("bad_request", std::string("malformed JSON: ") + e.what()).dump(),
                        "application/json");
        return;
      }

      LinkerConfig cfg = config.defaults;
      try {
        if (body.contains("top_k")) cfg.top_k = body["top_k"].get<uint32_t>();
        if (body.contains("mode")) {
          auto mode = parse_retrieval_mode(body["mode"].get<std::string>());
          if (!mode) throw ValidationError("unknown mode: " + body["mode"].dump());
          cfg.mode = *mode;
        }
        std::string text = body["text"].get<std::string>();

        LinkResult result;
        if (body.contains("spans")) {
          std::vector<ExternalSpan> spans;
          for (const auto& s : body["spans"]) {
            ExternalSpan span;
            span.start = s.at("start").get<size_t>();
            span.end = s.at("end").get<size_t>();
            span.label = s.value("label", std::string());
            spans.push_back(std::move(span));
          }
          result = linker->link_with_spans(text, spans, cfg);
        } else {
          result = linker->link_text(text, cfg);
        }
        latency.record(result.timing.total_ms);
        res.set_content(link_result_to_json(result).dump(), "application/json");
      } catch (const ValidationError& e) {
        res.status = 400;
        res.set_content(error_body("bad_request", e.what()).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_body("internal", e.what()).dump(), "application/json");
      }
    });
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Service::~Service() {
  stop();
}

void Service::set_dependencies(std::shared_ptr<Linker> linker) {
  impl_->linker = std::move(linker);
  impl_->ready.store(true);
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind to " + host);
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw IoError("cannot bind to " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

bool Service::listen(const std::string& host, int port) {
  if (!impl_->server.bind_to_port(host, port)) return false;
  return impl_->server.listen_after_bind();
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

bool Service::running() const { return impl_->server.is_running(); }

}  // namespace elkb
