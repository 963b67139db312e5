import init, { compareMethods, krrHistogram, methodNames, tradeoffCurve } from "./pkg/ldpcp_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

function guarded(errId, fn) {
  return () => {
    $(errId).textContent = "";
    try {
      fn();
    } catch (e) {
      $(errId).textContent = String(e.message ?? e);
    }
  };
}

function frame(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return { ctx, left: 60, right: canvas.width - 20, top: 20, bottom: canvas.height - 40 };
}

function legend(ctx, x, y, entries) {
  entries.forEach(([name, color], i) => {
    ctx.fillStyle = color;
    ctx.fillRect(x, y + i * 16, 10, 10);
    ctx.fillStyle = "#222";
    ctx.fillText(name, x + 14, y + i * 16 + 9);
  });
}

function plotTradeoff() {
  const flat = tradeoffCurve(num("t-k"), num("t-eps"), num("t-delta"), num("t-rounds"),
    Math.max(num("t-rounds"), 100), 1e7, 80);
  const pts = [];
  for (let i = 0; i < flat.length; i += 3) pts.push(flat.slice(i, i + 3));

  const f = frame($("t-canvas"));
  const { ctx } = f;
  const lx = pts.map((p) => Math.log10(p[0]));
  const ly = pts.flatMap((p) => [Math.log10(p[1]), Math.log10(p[2])]);
  const [x0, x1] = [Math.min(...lx), Math.max(...lx)];
  const [y0, y1] = [Math.floor(Math.min(...ly)), Math.ceil(Math.max(...ly))];
  const X = (v) => f.left + ((v - x0) / (x1 - x0)) * (f.right - f.left);
  const Y = (v) => f.bottom - ((v - y0) / (y1 - y0)) * (f.bottom - f.top);

  ctx.strokeStyle = "#ccc";
  ctx.fillStyle = "#444";
  for (let e = Math.ceil(x0); e <= x1; e++) {
    ctx.beginPath(); ctx.moveTo(X(e), f.top); ctx.lineTo(X(e), f.bottom); ctx.stroke();
    ctx.fillText(`1e${e}`, X(e) - 10, f.bottom + 16);
  }
  for (let e = y0; e <= y1; e++) {
    ctx.beginPath(); ctx.moveTo(f.left, Y(e)); ctx.lineTo(f.right, Y(e)); ctx.stroke();
    ctx.fillText(`1e${e}`, 20, Y(e) + 4);
  }
  ctx.fillText("n", (f.left + f.right) / 2, f.bottom + 32);

  [[1, "label perturbation", COLORS[0]], [2, "score perturbation", COLORS[1]]].forEach(([col, , color]) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.forEach((p, i) => {
      const [x, y] = [X(Math.log10(p[0])), Y(Math.log10(p[col]))];
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
  ctx.lineWidth = 1;
  legend(ctx, f.right - 150, f.top, [["label perturbation", COLORS[0]], ["score perturbation", COLORS[1]]]);
}

function runComparison() {
  const alpha = num("c-alpha");
  const names = methodNames();
  const flat = compareMethods(num("c-k"), num("c-n"), num("c-test"), num("c-eps"), alpha, 0.1,
    $("c-score").value, BigInt(num("c-seed")));
  const rows = names.map((name, i) => [name, ...flat.slice(4 * i, 4 * i + 4)]);

  $("c-table").innerHTML =
    "<tr><th>method</th><th>q</th><th>coverage</th><th>mean set size</th><th>correction</th></tr>" +
    rows.map(([n, q, c, s, d]) =>
      `<tr><td style="text-align:left">${n}</td><td>${q.toFixed(4)}</td><td>${c.toFixed(4)}</td>` +
      `<td>${s.toFixed(3)}</td><td>${d.toFixed(4)}</td></tr>`).join("");

  const f = frame($("c-canvas"));
  const { ctx } = f;
  const lo = Math.min(1 - alpha - 0.05, ...rows.map((r) => r[2])) - 0.01;
  const Y = (v) => f.bottom - ((v - lo) / (1 - lo)) * (f.bottom - f.top);
  const w = (f.right - f.left) / rows.length;
  rows.forEach(([name, , cov], i) => {
    ctx.fillStyle = COLORS[i];
    ctx.fillRect(f.left + i * w + 10, Y(cov), w - 20, f.bottom - Y(cov));
    ctx.fillStyle = "#222";
    ctx.fillText(name, f.left + i * w + 10, f.bottom + 16);
  });
  ctx.strokeStyle = "#000";
  ctx.setLineDash([5, 4]);
  ctx.beginPath(); ctx.moveTo(f.left, Y(1 - alpha)); ctx.lineTo(f.right, Y(1 - alpha)); ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillText(`1 - alpha = ${(1 - alpha).toFixed(2)}`, 4, Y(1 - alpha) + 4);
  ctx.fillText("coverage", 4, f.top);
}

function sampleKrr() {
  const k = num("h-k");
  const flat = krrHistogram(k, num("h-eps"), num("h-label"), num("h-draws"), 1n);
  const analytic = flat.slice(0, k);
  const empirical = flat.slice(k);

  const f = frame($("h-canvas"));
  const { ctx } = f;
  const top = Math.max(...analytic, ...empirical) * 1.1;
  const Y = (v) => f.bottom - (v / top) * (f.bottom - f.top);
  const w = (f.right - f.left) / k;
  for (let j = 0; j < k; j++) {
    const x = f.left + j * w;
    ctx.fillStyle = COLORS[0];
    ctx.fillRect(x + 4, Y(analytic[j]), w / 2 - 6, f.bottom - Y(analytic[j]));
    ctx.fillStyle = COLORS[3];
    ctx.fillRect(x + w / 2, Y(empirical[j]), w / 2 - 6, f.bottom - Y(empirical[j]));
    ctx.fillStyle = "#222";
    ctx.fillText(String(j), x + w / 2 - 4, f.bottom + 16);
  }
  ctx.fillText(top.toFixed(2), 10, f.top + 4);
  legend(ctx, f.right - 110, f.top, [["analytic", COLORS[0]], ["empirical", COLORS[3]]]);
}

await init();
$("t-run").onclick = guarded("t-err", plotTradeoff);
$("c-run").onclick = guarded("c-err", runComparison);
$("h-run").onclick = guarded("h-err", sampleKrr);
$("t-run").click();
$("h-run").click();
