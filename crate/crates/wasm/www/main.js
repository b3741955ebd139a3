import init, { solve_field, screen } from "./pkg/eddy_mlmc_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let screening = null;

function status(msg, isError = false) {
  $("status").textContent = msg;
  $("status").className = isError ? "err" : "";
}

// Blue (0) to yellow (1).
function color(t) {
  const r = Math.round(255 * Math.min(1, 1.8 * t));
  const g = Math.round(255 * Math.min(1, 0.3 + 0.9 * t));
  const b = Math.round(255 * (1 - t) * 0.9);
  return `rgb(${r},${g},${b})`;
}

function drawField(view) {
  const canvas = $("field");
  const ctx = canvas.getContext("2d");
  const nodes = view.nodes();
  const tris = view.triangles();
  const mag = view.magnitude();
  const max = mag.reduce((a, b) => Math.max(a, b), 0) || 1;
  const half = canvas.width / 2;
  const scale = (half - 10) / 0.8;
  const x = (i) => half + scale * nodes[2 * i];
  const y = (i) => half - scale * nodes[2 * i + 1];
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.lineWidth = 0.4;
  ctx.strokeStyle = "rgba(0,0,0,0.35)";
  const edges = $("wire").checked;
  for (let t = 0; t < tris.length; t += 3) {
    const [a, b, c] = [tris[t], tris[t + 1], tris[t + 2]];
    ctx.beginPath();
    ctx.moveTo(x(a), y(a));
    ctx.lineTo(x(b), y(b));
    ctx.lineTo(x(c), y(c));
    ctx.closePath();
    ctx.fillStyle = color((mag[a] + mag[b] + mag[c]) / (3 * max));
    ctx.fill();
    if (edges) ctx.stroke();
  }
}

function runSolve() {
  status("solving...");
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const v = solve_field(num("level"), num("r1"), num("i0"), num("mu"), num("sigma"), num("hz"));
      const ms = performance.now() - t0;
      drawField(v);
      const rel = (v.energy - v.reference) / v.reference;
      $("field-info").textContent = [
        `level ${v.level}, ${v.n_dof} DoF`,
        `W_FEM     = ${v.energy.toExponential(6)} J/m`,
        `W_radial  = ${v.reference.toExponential(6)} J/m`,
        `rel. err  = ${rel.toExponential(2)}`,
        `residual  = ${v.residual.toExponential(2)}`,
        `time      = ${ms.toFixed(0)} ms`,
        "",
        "colour: |A_z| (blue low, yellow high)",
      ].join("\n");
      v.free();
      status("");
    } catch (e) {
      status(String(e), true);
    }
  }, 10);
}

function drawDecay(rows, levels) {
  const canvas = $("decay");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const series = [
    { idx: 3, color: "#1f77b4", label: "V[W_l]" },
    { idx: 5, color: "#d62728", label: "V[W_l - W_l-1]" },
  ];
  const vals = [];
  for (let l = 0; l < levels; l++) for (const s of series) vals.push(Math.log10(rows[6 * l + s.idx]));
  const lo = Math.floor(Math.min(...vals));
  const hi = Math.ceil(Math.max(...vals));
  const px = (l) => 50 + (l * (canvas.width - 80)) / Math.max(1, levels - 1);
  const py = (v) => canvas.height - 30 - ((v - lo) * (canvas.height - 50)) / Math.max(1, hi - lo);
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  for (let d = lo; d <= hi; d++) ctx.fillText(`1e${d}`, 5, py(d) + 4);
  for (let l = 0; l < levels; l++) ctx.fillText(`l=${l}`, px(l) - 8, canvas.height - 10);
  series.forEach((s, k) => {
    ctx.strokeStyle = ctx.fillStyle = s.color;
    ctx.beginPath();
    for (let l = 0; l < levels; l++) {
      const v = Math.log10(rows[6 * l + s.idx]);
      if (l === 0) ctx.moveTo(px(l), py(v));
      else ctx.lineTo(px(l), py(v));
    }
    ctx.stroke();
    ctx.fillText(s.label, canvas.width - 110, 20 + 14 * k);
  });
}

function runScreen() {
  status("screening...");
  setTimeout(() => {
    try {
      if (screening) screening.free();
      screening = screen(num("screen-level"), num("screen-n"), num("screen-seed"));
      const rows = screening.rows();
      const levels = screening.levels;
      const head = ["level", "DoF", "E[W_l]", "V[W_l]", "E[dW]", "V[dW]"];
      let html = "<table><tr>" + head.map((h) => `<th>${h}</th>`).join("") + "</tr>";
      for (let l = 0; l < levels; l++) {
        const r = rows.slice(6 * l, 6 * l + 6);
        html += `<tr><td>${r[0]}</td><td>${r[1]}</td>` + r.slice(2).map((v) => `<td>${v.toExponential(3)}</td>`).join("") + "</tr>";
      }
      $("screen-table").innerHTML = html + "</table>";
      drawDecay(rows, levels);
      updateAllocation();
      status("");
    } catch (e) {
      status(String(e), true);
    }
  }, 10);
}

function updateAllocation() {
  const eps = Math.pow(10, num("eps"));
  $("eps-value").textContent = eps.toExponential(2);
  if (!screening) {
    $("alloc").textContent = "run a screening first";
    return;
  }
  try {
    const a = screening.allocate(eps);
    const n = Array.from(a.samples());
    $("alloc").textContent = [
      `N_l       = [${n.join(", ")}]`,
      `cost MLMC = ${a.cost_mlmc.toExponential(3)} DoF`,
      `cost MC   = ${a.cost_mc.toExponential(3)} DoF (finest screened level)`,
      `ratio     = ${(a.cost_mlmc / a.cost_mc).toFixed(4)}`,
      `level-0 share of MLMC cost = ${(100 * a.level0_share).toFixed(1)} %`,
    ].join("\n");
    a.free();
  } catch (e) {
    status(String(e), true);
  }
}

await init();
$("solve").addEventListener("click", runSolve);
$("screen").addEventListener("click", runScreen);
$("eps").addEventListener("input", updateAllocation);
$("wire").addEventListener("change", runSolve);
updateAllocation();
runSolve();
