#include "ttm/server.hpp"

#include <chrono>
#include <deque>
#include <map>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "ttm/error.hpp"

namespace ttm::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Session;

}  // namespace

struct Server::Impl {
  explicit Impl(ServerOptions opts) : options(std::move(opts)), hub(options.hub), acceptor(ioc), timer(ioc) {}

  void accept();
  void schedule_tick();
  void dispatch(const std::vector<Outbound>& out);

  ServerOptions options;
  asio::io_context ioc{1};
  ChatHub hub;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::map<ConnId, std::weak_ptr<Session>> sessions;
  bool bound = false;
};

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void send(std::string text) {
    queue_.push_back(std::move(text));
    if (queue_.size() == 1) write_next();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    id_ = server_.hub.connect();
    server_.sessions[id_] = weak_from_this();
    ws_.text(true);
    read();
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      finish();
      return;
    }
    const std::string frame = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    server_.dispatch(server_.hub.handle(id_, frame));
    read();
  }

  void write_next() {
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      finish();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty()) write_next();
  }

  void finish() {
    if (finished_ || id_ == 0) return;
    finished_ = true;
    server_.sessions.erase(id_);
    server_.dispatch(server_.hub.disconnect(id_));
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  ConnId id_ = 0;
  bool finished_ = false;
};

}  // namespace

void Server::Impl::accept() {
  acceptor.async_accept(ioc, [this](beast::error_code ec, tcp::socket socket) {
    if (ec == asio::error::operation_aborted) return;
    if (!ec) std::make_shared<Session>(std::move(socket), *this)->start();
    accept();
  });
}

void Server::Impl::schedule_tick() {
  timer.expires_after(std::chrono::milliseconds(500));
  timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    dispatch(hub.tick());
    schedule_tick();
  });
}

void Server::Impl::dispatch(const std::vector<Outbound>& out) {
  for (const auto& o : out) {
    auto it = sessions.find(o.conn);
    if (it == sessions.end()) continue;
    if (auto s = it->second.lock()) s->send(o.text);
  }
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() = default;

std::uint16_t Server::bind() {
  if (impl_->bound) return impl_->acceptor.local_endpoint().port();
  beast::error_code ec;
  const auto addr = asio::ip::make_address(impl_->options.address, ec);
  if (ec) throw Error(Errc::Io, "bad listen address '" + impl_->options.address + "'");
  const tcp::endpoint ep(addr, impl_->options.port);
  impl_->acceptor.open(ep.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(ep, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::Io, "cannot listen on " + impl_->options.address + ":" +
                                    std::to_string(impl_->options.port) + ": " + ec.message());
  impl_->bound = true;
  return impl_->acceptor.local_endpoint().port();
}

void Server::run(bool handle_signals) {
  bind();
  impl_->accept();
  impl_->schedule_tick();
  std::optional<asio::signal_set> signals;
  if (handle_signals) {
    signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code, int) { stop(); });
  }
  impl_->ioc.run();
  for (auto& [_, weak] : impl_->sessions) {
    if (auto s = weak.lock()) s->close();
  }
}

void Server::stop() {
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->timer.cancel();
    impl_->ioc.stop();
  });
}

}  // namespace ttm::service
