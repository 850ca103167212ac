"""Ring of three blocks of four neurons: active and quiet blocks rotate.

Writes a raster SVG and prints the sequence of active block pairs.
"""

import sys

from hhcircuit.circuit import CircuitSpec, block_activity, build_circuit, detect_rotation, run_circuit
from hhcircuit.experiments import emit_raster_svg

circuit = build_circuit(CircuitSpec.rotating_example(seed=0))
run = run_circuit(circuit, 1800.0)
activity = block_activity(run.trains, circuit)
verdict = detect_rotation(activity)

print("spikes per neuron:", [len(tr) for tr in run.trains])
print("active blocks over time:", verdict.active_sequence[:12])
print(f"rotating={verdict.rotating} direction={verdict.direction} period={verdict.period}")
path = sys.argv[1] if len(sys.argv) > 1 else "raster.svg"
emit_raster_svg(run.trains, circuit, path, t_end=1800.0)
print("raster written to", path)
