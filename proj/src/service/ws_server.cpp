#include "h2r/ws_server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "h2r/error.hpp"

namespace h2r {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kObserverBacklog = 256;

// Fan-out queue for one read-only subscriber; the oldest message goes first
// when the subscriber falls behind.
struct Observer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> queue;
  bool closed = false;

  void push(const std::string& text) {
    {
      std::lock_guard lock(mu);
      if (closed) return;
      if (queue.size() >= kObserverBacklog) queue.pop_front();
      queue.push_back(text);
    }
    cv.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

bool broadcast_type(const json& msg) {
  const auto& t = msg["type"];
  return t != "knn_result" && t != "error";
}

}  // namespace

struct WsServer::Impl {
  ServerOptions options;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::atomic<bool> stopping{false};

  std::mutex mu;
  std::list<std::shared_ptr<Observer>> observers;
  std::list<std::thread> threads;
  std::list<int> open_fds;

  void publish(const std::vector<json>& msgs) {
    std::lock_guard lock(mu);
    for (const auto& m : msgs) {
      if (!broadcast_type(m)) continue;
      const std::string text = m.dump();
      for (auto& o : observers) o->push(text);
    }
  }

  void serve_session(websocket::stream<tcp::socket>& ws) {
    SessionOptions opts = options.session;
    std::error_code ec;
    if (std::filesystem::is_directory(opts.record_dir, ec)) {
      opts.first_episode_seq = list_episodes(opts.record_dir).size();
    }
    Session session(opts);
    ws.text(true);
    ws.write(asio::buffer(session.state_message().dump()));
    beast::flat_buffer buffer;
    for (;;) {
      beast::error_code rec;
      ws.read(buffer, rec);
      if (rec) break;
      std::vector<json> out;
      const json msg = json::parse(beast::buffers_to_string(buffer.data()), nullptr, false);
      buffer.consume(buffer.size());
      if (msg.is_discarded()) {
        out.push_back(protocol::error_message(ErrorCode::BadMessage, "frame is not valid JSON"));
      } else {
        out = session.handle_message(msg);
      }
      publish(out);
      for (const auto& m : out) {
        ws.write(asio::buffer(m.dump()), rec);
        if (rec) break;
      }
      if (rec) break;
    }
    publish(session.close());
  }

  void serve_observer(websocket::stream<tcp::socket>& ws) {
    auto obs = std::make_shared<Observer>();
    {
      std::lock_guard lock(mu);
      observers.push_back(obs);
    }
    ws.text(true);
    for (;;) {
      std::unique_lock lock(obs->mu);
      obs->cv.wait(lock, [&] { return obs->closed || !obs->queue.empty(); });
      if (obs->closed) break;
      const std::string text = std::move(obs->queue.front());
      obs->queue.pop_front();
      lock.unlock();
      beast::error_code ec;
      ws.write(asio::buffer(text), ec);
      if (ec) break;
    }
    std::lock_guard lock(mu);
    observers.remove(obs);
  }

  void serve(tcp::socket socket) {
    const int fd = socket.native_handle();
    {
      std::lock_guard lock(mu);
      open_fds.push_back(fd);
    }
    try {
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(socket, buffer, req);
      websocket::stream<tcp::socket> ws(std::move(socket));
      ws.accept(req);
      if (req.target() == "/observe") {
        serve_observer(ws);
      } else {
        serve_session(ws);
      }
      beast::error_code ec;
      ws.close(websocket::close_code::normal, ec);
    } catch (const std::exception& e) {
      if (!stopping) std::cerr << json{{"event", "connection_error"}, {"detail", e.what()}}.dump() << '\n';
    }
    std::lock_guard lock(mu);
    open_fds.remove(fd);
  }

  void accept_next() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec || stopping) return;
      std::lock_guard lock(mu);
      threads.emplace_back([this, s = std::move(socket)]() mutable { serve(std::move(s)); });
      accept_next();
    });
  }
};

WsServer::WsServer(ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->options.session.config.validate();
  try {
    const tcp::endpoint ep(asio::ip::make_address(impl_->options.host), impl_->options.port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoFailure, std::string("cannot listen: ") + e.what());
  }
}

WsServer::~WsServer() {
  stop();
  std::list<std::thread> threads;
  {
    std::lock_guard lock(impl_->mu);
    threads.swap(impl_->threads);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

std::uint16_t WsServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WsServer::run() {
  impl_->accept_next();
  impl_->ioc.run();
}

void WsServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->ioc.stop();
  std::lock_guard lock(impl_->mu);
  for (auto& o : impl_->observers) o->close();
  // Unblocks connection threads stuck in a synchronous read.
  for (int fd : impl_->open_fds) ::shutdown(fd, SHUT_RDWR);
}

}  // namespace h2r
