#include "contcomm/server.hpp"

#include <httplib.h>

#include <iostream>

namespace contcomm::gateway {

using nlohmann::json;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownUser:
    case ErrorCode::UnknownTopic:
    case ErrorCode::InvalidTopic:
    case ErrorCode::UnknownKey:
      return 404;
    case ErrorCode::InvalidArgument:
      return 400;
    case ErrorCode::ShardUnavailable:
    case ErrorCode::QuorumLost:
    case ErrorCode::BrokerStopped:
      return 503;
    default:
      return 500;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  reply(res, status, {{"error", std::string(code)}, {"message", message}});
}

// Runs a handler, mapping library errors onto HTTP statuses.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    fail(res, status_for(e.code()), to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    fail(res, 400, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    fail(res, 500, "Internal", e.what());
  }
}

std::optional<BBox> bbox_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  BBox b;
  if (j.is_array() && j.size() == 4) {
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } else if (j.is_object()) {
    b = {j.at("south").get<double>(), j.at("west").get<double>(), j.at("north").get<double>(),
         j.at("east").get<double>()};
  } else {
    throw Error(ErrorCode::InvalidArgument, "bbox must be [south, west, north, east] or an object");
  }
  b.validate();
  return b;
}

std::size_t parse_topic(const std::string& s) {
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size() || s[0] == '-') throw Error(ErrorCode::InvalidArgument, "bad topic '" + s + "'");
  return v;
}

std::string sse_frame(const PinEvent& e) {
  return "event: " + std::string(event_name(e.type)) + "\ndata: " + to_json(e).dump() + "\n\n";
}

}  // namespace

GatewayServer::GatewayServer(Pipeline& pipeline, const LivenessMonitor* liveness)
    : pipeline_(pipeline), liveness_(liveness), http_(std::make_unique<httplib::Server>()) {
  // httplib's default adds SO_REUSEPORT, which lets a second gateway bind the
  // same port and quietly take half the connections.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  routes();
}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::routes() {
  auto& s = *http_;

  s.Post("/subscriptions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = json::parse(req.body);
      std::set<std::size_t> topics;
      for (const auto& t : body.at("topics")) topics.insert(t.get<std::size_t>());
      auto sub = pipeline_.hub().subscribe(body.at("user_id").get<std::string>(), topics,
                                           bbox_from_json(body.value("bbox", json(nullptr))),
                                           pipeline_.clock().now(), pipeline_.pins().pins());
      reply(res, 201, to_json(sub));
    });
  });

  s.Delete(R"(/subscriptions/([^/]+)/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string user = req.matches[1];
      const auto topic = parse_topic(req.matches[2]);
      pipeline_.hub().unsubscribe(user, {topic});
      reply(res, 200, {{"user_id", user}, {"topic", topic}, {"unsubscribed", true}});
    });
  });

  s.Get("/topics", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, pipeline_.topics_report(10)); });
  });

  s.Get("/communities", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<std::size_t> topic;
      std::optional<BBox> box;
      if (req.has_param("topic") && !req.get_param_value("topic").empty())
        topic = parse_topic(req.get_param_value("topic"));
      if (req.has_param("bbox") && !req.get_param_value("bbox").empty())
        box = BBox::parse(req.get_param_value("bbox"));
      auto all = pipeline_.communities();
      std::erase_if(all, [&](const auto& c) {
        return (topic && c.topic != *topic) || (box && !box->contains(c.centroid));
      });
      reply(res, 200, communities::community_report(all));
    });
  });

  s.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      auto h = pipeline_.health();
      if (liveness_) h["liveness"] = to_json(liveness_->report());
      reply(res, 200, h);
    });
  });

  s.Get("/events", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_param("user_id")) throw Error(ErrorCode::InvalidArgument, "user_id is required");
      auto mailbox = pipeline_.hub().connect(req.get_param_value("user_id"), pipeline_.pins().pins());
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, mailbox](std::size_t, httplib::DataSink& sink) {
        if (stopping_) {
          sink.done();
          return true;
        }
        if (auto e = mailbox->pop(Millis{500})) {
          const auto frame = sse_frame(*e);
          return sink.write(frame.data(), frame.size());
        }
        if (mailbox->closed()) {
          sink.done();
          return true;
        }
        static constexpr char ping[] = ": ping\n\n";
        return sink.write(ping, sizeof(ping) - 1);
      });
    });
  });
}

int GatewayServer::bind(const std::string& host, int port) {
  const bool ok = port == 0 ? (port_ = http_->bind_to_any_port(host)) > 0 : http_->bind_to_port(host, port);
  if (!ok) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  if (port != 0) port_ = port;
  return port_;
}

void GatewayServer::start() {
  if (thread_.joinable()) return;
  thread_ = std::thread([this] { run(); });
  http_->wait_until_ready();
}

void GatewayServer::run() {
  if (port_ < 0) throw Error(ErrorCode::InvalidArgument, "bind before serving");
  if (!http_->listen_after_bind() && !stopping_) std::clog << "gateway: listener ended unexpectedly\n";
}

void GatewayServer::stop() {
  if (stopping_.exchange(true)) return;
  pipeline_.hub().close_all();
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace contcomm::gateway
