// Standalone mock IDRD backend for tests: stdio by default, or TCP with
// --tcp <port> (0 picks a free port, announced as "PORT <n>" on stdout).

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>

#include "mock_backend.h"

using namespace idard;

int main(int argc, char** argv) {
  testing::MockOptions options;
  int tcp_port = -1;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--factors" && i + 1 < argc) {
      options.factors.clear();
      std::stringstream in(argv[++i]);
      std::string item;
      while (std::getline(in, item, ',')) {
        options.factors.push_back(static_cast<std::uint16_t>(std::stoi(item)));
      }
    } else if (arg == "--tcp" && i + 1 < argc) {
      tcp_port = std::stoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--factors 2,4,8] [--tcp port]\n", argv[0]);
      return 2;
    }
  }
  IgnoreSigpipeOnce();
  if (tcp_port < 0) {
    FdTransport stdio(0, 1, "stdio", std::chrono::minutes(10));
    testing::ServeMock(stdio, options);
    return 0;
  }

  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(tcp_port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 8) != 0) {
    std::perror("bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  std::printf("PORT %d\n", ntohs(addr.sin_port));
  std::fflush(stdout);
  // One connection at a time, until killed.
  while (true) {
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) continue;
    FdTransport conn(fd, fd, "tcp", std::chrono::minutes(10));
    testing::ServeMock(conn, options);
  }
}
