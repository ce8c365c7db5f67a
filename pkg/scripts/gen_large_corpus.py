"""Generate the multi-unit corpus program used for incremental-check timing."""
from __future__ import annotations

import argparse
from pathlib import Path

UNIT = """package app.svc{i};

class Svc{i} {{
  Map<String, String> data = new HashMap<>();
  Svc{j} next = new Svc{j}();
  List<String> names = new ArrayList<>();
  String fetch(String key) {{
    String v = data.get(key);
    return v.trim();
  }}
  String tag(String a) {{
    return a.concat("-{i}");
  }}
  void record(String item) {{
    names.add(item);
    data.put(item, "seen");
  }}
  void handle(String req) {{
    String r = next.fetch(req);
    if (r.isEmpty()) {{
      r = "none";
    }} else {{
      r = r.toLowerCase();
    }}
    Log.info(r);
    int n = 0;
    while (n < 3) {{
      n = n + 1;
      record(tag(r));
    }}
  }}
{extra}}}
"""

FLOW = """  void flow() {{
    Sink.run(Taint.read("p{i}")); //!flow
  }}
"""

BENIGN = """  void report() {{
    Sink.run(tag("static")); //!benign
  }}
"""

HEADER = """package ext;

class Taint {
  static String source();
  static String read(String key);
}
class Log {
  static void info(String s);
}
"""

SINK = """package app.core;

class Sink {
  static void run(@Untainted String s) {
  }
}
"""


def generate(out: Path, units: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "Ext.mj").write_text(HEADER)
    (out / "Sink.mj").write_text(SINK)
    for i in range(units):
        extra = ""
        if i % 6 == 0:
            extra += FLOW.format(i=i)
        if i % 10 == 3:
            extra += BENIGN.format(i=i)
        j = (i + 1) % units
        (out / f"Svc{i:02d}.mj").write_text(UNIT.format(i=i, j=j, extra=extra))
    (out / "taint.toml").write_text(
        'annotated_packages = "app\\\\..*"\nsources = ["Taint#source", "Taint#read"]\nsrc_dirs = ["."]\n')


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--units", type=int, default=40)
    a = ap.parse_args()
    generate(a.out, a.units)


if __name__ == "__main__":
    main()
