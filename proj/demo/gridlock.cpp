// A three-cell ring that starts jammed stays jammed whatever enters it.
#include <cstdio>

#include "netstab/freeway.hpp"
#include "netstab/simulation.hpp"

int main() {
  using namespace netstab;
  NetworkSpec ring;
  ring.n = 3;
  ring.a.assign(3, 170.0);
  ring.mu.assign(3, 55.0);
  ring.vmax.assign(3, 25.0);
  ring.P = Matrix(3, 3, 0.0);
  ring.P(0, 1) = ring.P(1, 2) = ring.P(2, 0) = 1.0;
  ring.Qexit.assign(3, 0.0);
  Diagrams dg = freeway::diagrams();
  dg.cells.resize(3);

  const GridlockReport rep = gridlock_demo(ring, dg, 1000, 1);
  std::printf("after %zu steps the largest move on the ring is %g veh\n", rep.record.horizon(), rep.max_cycle_deviation);
}
