// Scripted chat-completion endpoint for demos. Model ids select behaviour
// (fair, biased, short, flaky, echo, error); see fisco/mock_model.hpp.
#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "fisco/errors.hpp"
#include "fisco/mock_model.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scripted model endpoint"};
  int port = 8765;
  int latency_ms = 0;
  app.add_option("--port", port, "Port on 127.0.0.1 (0 picks a free one)");
  app.add_option("--latency-ms", latency_ms, "Delay before each reply");
  CLI11_PARSE(app, argc, argv);

  try {
    fisco::mock::MockModelServer server(fisco::mock::scripted_handler, std::chrono::milliseconds(latency_ms), port);
    std::cout << server.base_url() << std::endl;
    server.wait();
  } catch (const fisco::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
