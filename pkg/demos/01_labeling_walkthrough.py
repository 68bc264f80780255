"""Walk through the labeling pipeline on the scripted Suns/Warriors game.

Shows the raw play-by-play rows, the canonical events the parser extracts,
and the two opportunities the labeler finds: a first-period non-attempt that
loses three points of margin and a second-period attempt that gains five.
"""

from tfo import label, pbp, synth

scenario = synth.worked_example_scenario()
frame = synth.script_pbp(scenario)
print("Raw play-by-play (pbp.csv layout):")
print(frame.to_string(index=False))

events = pbp.canonicalize_game(pbp.rows_from_frame(frame))
print("\nCanonical events:")
for ev in events:
    extra = ""
    if ev.kind == "Substitution":
        extra = f" ({ev.sub_in} in, {ev.sub_out} out)"
    print(f"  P{ev.period} {ev.clock_s:>3d}s {ev.team:<7s} {ev.kind:<16s} "
          f"{ev.score_home}-{ev.score_visitor}{extra}")

observations = label.label_game(events)
print("\nLabeled opportunities:")
for o in observations:
    print(f"  P{o.period} {o.team} gained at {o.gain_clock_s}s "
          f"({o.gain_reason}) -> {o.classification}, margin change {o.pod:+d}")

print("\nChanging the attempt cutoff relabels the same events:")
for cutoff in (26, 28, 30, 32):
    defn = label.TfoDefinition(43, 35, cutoff)
    relabeled = label.label_game(events, defn)
    kinds = ", ".join(f"{o.team} P{o.period}: {o.classification}" for o in relabeled)
    print(f"  cutoff {cutoff}s -> {kinds}")
