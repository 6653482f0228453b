// Built by `wasm-pack build crates/demo --target web --out-dir www/pkg`.
import init, { star_domain, cheeger, separable_domains } from "./pkg/neumann_atlas_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const KIND_COLOURS = { lens: "#1f77b4", wedge: "#2ca02c", star: "#d62728" };

// Maps a data box onto a canvas with equal scaling on both axes.
function viewport(canvas, [x0, x1], [y0, y1], pad = 16) {
  const s = Math.min((canvas.width - 2 * pad) / (x1 - x0), (canvas.height - 2 * pad) / (y1 - y0));
  const ox = (canvas.width - s * (x1 - x0)) / 2;
  const oy = (canvas.height - s * (y1 - y0)) / 2;
  return ([x, y]) => [ox + s * (x - x0), canvas.height - oy - s * (y - y0)];
}

function polyline(ctx, pts, map, close = false) {
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [u, v] = map(p);
    i === 0 ? ctx.moveTo(u, v) : ctx.lineTo(u, v);
  });
  if (close) ctx.closePath();
}

function fail(target, e) {
  $(target).innerHTML = `<span class="err">${String(e)}</span>`;
}

function drawStar() {
  let view;
  try {
    view = JSON.parse(star_domain(num("star-a"), num("star-b"), 400));
  } catch (e) {
    return fail("star-info", e);
  }
  const c = $("star-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const map = viewport(c, [-view.a, view.a], [-view.b, view.b]);
  ctx.strokeStyle = "#aaa";
  polyline(ctx, [[-view.a, -view.b], [view.a, -view.b], [view.a, view.b], [-view.a, view.b]], map, true);
  ctx.stroke();
  ctx.fillStyle = "rgba(214,39,40,.15)";
  ctx.strokeStyle = "#d62728";
  polyline(ctx, view.outline, map, true);
  ctx.fill();
  ctx.stroke();
  const w = view.admissibility;
  $("star-info").textContent = [
    `λ_ab        = ${view.lambda_ab.toPrecision(10)}`,
    `|Λ_ab|      = ${view.quarter_area.toPrecision(10)}`,
    `ρ(star)     = ${view.rho.rho_star.toFixed(6)}`,
    `ρ(lens)     = ${view.rho.rho_lens.toFixed(6)}`,
    `sector window (α/π) = [${(w.alpha_lo / Math.PI).toFixed(5)}, ${(w.alpha_hi / Math.PI).toFixed(5)}]`,
    `admissible sector   : ${w.feasible ? "yes" : "no"} (margin ${w.margin.toExponential(3)})`,
  ].join("\n");
}

function drawCheeger() {
  let view;
  try {
    view = JSON.parse(cheeger(num("ch-a"), num("ch-b"), num("ch-n"), $("ch-gauss").checked));
  } catch (e) {
    return fail("ch-info", e);
  }
  // F and C against log10(η/|Λ|), each scaled to its own range.
  const c = $("ch-curve");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const xs = view.points.map((p) => Math.log10(p.eta / view.quarter_area));
  const [xlo, xhi] = [Math.min(...xs), Math.max(...xs)];
  const pad = 24;
  const sx = (x) => pad + ((x - xlo) / (xhi - xlo)) * (c.width - 2 * pad);
  for (const [key, colour] of [["f", "#1f77b4"], ["c", "#d62728"]]) {
    const ys = view.points.map((p) => Math.log10(p[key]));
    const [ylo, yhi] = [Math.min(...ys), Math.max(...ys)];
    const sy = (y) => c.height - pad - ((y - ylo) / (yhi - ylo || 1)) * (c.height - 2 * pad);
    ctx.strokeStyle = colour;
    ctx.beginPath();
    xs.forEach((x, i) => (i === 0 ? ctx.moveTo(sx(x), sy(ys[i])) : ctx.lineTo(sx(x), sy(ys[i]))));
    ctx.stroke();
  }
  ctx.fillStyle = "#333";
  ctx.fillText("log F (blue), log C (red) against log η/|Λ|", pad, 14);

  const s = $("ch-set");
  const sctx = s.getContext("2d");
  sctx.clearRect(0, 0, s.width, s.height);
  const a = num("ch-a");
  const b = num("ch-b");
  const pts = view.optimal_set;
  const xmax = Math.max(...pts.map((p) => p[0]), b);
  const map = viewport(s, [0, Math.min(a, 3 * xmax)], [0, b]);
  sctx.fillStyle = "rgba(214,39,40,.2)";
  sctx.strokeStyle = "#d62728";
  polyline(sctx, pts, map, true);
  sctx.fill();
  sctx.stroke();
  $("ch-info").textContent = [
    `min C = ${view.min_c.toPrecision(8)} at η = ${view.argmin_eta.toExponential(4)} (η/|Λ| = ${(view.argmin_eta / view.quarter_area).toExponential(3)})`,
    view.transition_eta === null ? "no transition on the grid" : `arc leaves v at η = ${view.transition_eta.toExponential(4)}`,
    `${view.points.length} points`,
  ].join("\n");
}

function drawSeparable() {
  let view;
  $("sep-info").textContent = "tracing…";
  try {
    view = JSON.parse(separable_domains(num("sep-n1"), num("sep-n2"), num("sep-res")));
  } catch (e) {
    return fail("sep-info", e);
  }
  const c = $("sep-canvas");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const map = viewport(c, [0, 1], [0, 1], 10);
  ctx.strokeStyle = "#ccc";
  polyline(ctx, [[0, 0], [1, 0], [1, 1], [0, 1]], map, true);
  ctx.stroke();
  ctx.lineWidth = 1.5;
  for (const d of view.domains) {
    ctx.strokeStyle = KIND_COLOURS[d.kind] ?? "#000";
    for (const piece of d.pieces) {
      polyline(ctx, piece, map);
      ctx.stroke();
    }
  }
  const byKind = {};
  for (const d of view.domains) (byKind[d.kind] ??= []).push(d.rho);
  const lines = [`λ = ${view.lambda.toFixed(6)}`, `${view.domains.length} domains, ${view.excluded} excluded`];
  for (const [k, rhos] of Object.entries(byKind)) {
    const mean = rhos.reduce((s, r) => s + r, 0) / rhos.length;
    lines.push(`${k.padEnd(6)} ${String(rhos.length).padStart(4)}  mean ρ = ${mean.toFixed(6)}`);
  }
  $("sep-info").textContent = lines.join("\n");
}

await init();
$("status").textContent = "Ready. Computations run in the page; nothing is sent anywhere.";
$("star-go").onclick = drawStar;
$("ch-go").onclick = drawCheeger;
$("sep-go").onclick = drawSeparable;
drawStar();
drawCheeger();
drawSeparable();
