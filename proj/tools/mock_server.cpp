// Serves a fixture-driven chat-completion endpoint on 127.0.0.1 until killed.

#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "comment_judge/dataset_io.hpp"
#include "comment_judge/mock_server.hpp"

namespace {
comment_judge::MockServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->shutdown();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixture-driven mock chat-completion endpoint", "comment-judge-mock-server"};
  std::string fixture_path;
  int port = 0;
  std::string port_file;
  app.add_option("--fixture", fixture_path, "JSON fixture describing replies")->required();
  app.add_option("--port", port, "port to bind (0 picks a free one)")->check(CLI::Range(0, 65535));
  app.add_option("--port-file", port_file, "write the bound port to this file once listening");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    comment_judge::MockServer server(comment_judge::load_mock_fixture(fixture_path), port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (!port_file.empty()) comment_judge::write_file(port_file, std::to_string(server.port()) + "\n");
    std::cout << "listening on " << server.url() << std::endl;
    server.wait();
    g_server = nullptr;
  } catch (const comment_judge::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  }
  return 0;
}
