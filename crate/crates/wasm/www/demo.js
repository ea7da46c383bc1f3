// Loads the module built by `wasm-pack build crates/wasm --target web --out-dir www/pkg`.
import init, { Demo, Voice } from "./pkg/ccd_wasm.js";

const canvas = document.getElementById("view");
const ctx = canvas.getContext("2d");
const $ = (id) => document.getElementById(id);
const SCALE = 2;
const HANDLE_RADIUS = 6;
const COLORS = { neck: "#ffc800", shaft: "#00c8ff" };

let demo = null;
let sides = [];
let image = null;
let view = "both";
let drag = null;
let voice = null;

function log(line) {
  const el = $("log");
  el.textContent = `${line}\n${el.textContent}`.slice(0, 2000);
}

function generate() {
  const seed = BigInt(Math.max(0, Number($("seed").value) | 0));
  try {
    demo?.free();
    demo = new Demo(seed, 256, Number($("outliers").value), Number($("noise").value));
  } catch (e) {
    log(`generate failed: ${e.message ?? e}`);
    return;
  }
  canvas.width = demo.width * SCALE;
  canvas.height = demo.height * SCALE;
  image = new ImageData(new Uint8ClampedArray(demo.pixels()), demo.width, demo.height);
  sides = JSON.parse(demo.sides());
  render();
}

// Visible x range in raster pixels for the current zoom.
function visibleRange() {
  const w = demo.width;
  if (view === "left_zoom") return [0, w / 2];
  if (view === "right_zoom") return [w / 2, w];
  return [0, w];
}

function toCanvas([x, y]) {
  const [x0, x1] = visibleRange();
  const k = canvas.width / (x1 - x0);
  return [(x - x0 + 0.5) * k, (y + 0.5) * (canvas.height / demo.height)];
}

function fromCanvas(cx, cy) {
  const [x0, x1] = visibleRange();
  const k = canvas.width / (x1 - x0);
  return [cx / k + x0 - 0.5, cy / (canvas.height / demo.height) - 0.5];
}

function render() {
  if (!demo) return;
  const [x0, x1] = visibleRange();
  const off = new OffscreenCanvas(demo.width, demo.height);
  off.getContext("2d").putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, x0, 0, x1 - x0, demo.height, 0, 0, canvas.width, canvas.height);
  for (const s of sides) {
    const label = $(`angle-${s.side}`);
    const truth = $(`truth-${s.side}`);
    truth.textContent = s.true_ccd == null ? "" : `truth ${s.true_ccd.toFixed(2)}°`;
    if (!s.measurement) {
      label.textContent = "unavailable";
      continue;
    }
    label.textContent = `${s.measurement.ccd_degrees.toFixed(2)}°`;
    for (const which of ["neck", "shaft"]) {
      const [a, b] = s.measurement[`${which}_endpoints`].map(toCanvas);
      ctx.strokeStyle = COLORS[which];
      ctx.lineWidth = 3;
      ctx.beginPath();
      ctx.moveTo(...a);
      ctx.lineTo(...b);
      ctx.stroke();
      for (const [px, py] of [a, b]) {
        ctx.fillStyle = "#ff3c3c";
        ctx.beginPath();
        ctx.arc(px, py, HANDLE_RADIUS, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
  }
}

function canvasPoint(ev) {
  const r = canvas.getBoundingClientRect();
  return [(ev.clientX - r.left) * (canvas.width / r.width), (ev.clientY - r.top) * (canvas.height / r.height)];
}

canvas.addEventListener("pointerdown", (ev) => {
  const [cx, cy] = canvasPoint(ev);
  for (const s of sides) {
    if (!s.measurement) continue;
    for (const which of ["neck", "shaft"]) {
      s.measurement[`${which}_endpoints`].forEach((p, endpoint) => {
        const [px, py] = toCanvas(p);
        if (Math.hypot(px - cx, py - cy) <= HANDLE_RADIUS * 2) drag = { side: s.side, which, endpoint };
      });
    }
  }
  if (drag) canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!drag) return;
  const [x, y] = fromCanvas(...canvasPoint(ev));
  try {
    demo.edit(drag.side, drag.which, drag.endpoint, x, y);
    sides = JSON.parse(demo.sides());
    render();
  } catch (e) {
    // coincident endpoints: keep the previous position
  }
});

canvas.addEventListener("pointerup", () => (drag = null));

function applyVoice(result) {
  const r = JSON.parse(result);
  $("indicator").classList.toggle("active", r.indicator === "active");
  for (const a of r.actions) {
    switch (a.action) {
      case "zoom_left": view = "left_zoom"; break;
      case "zoom_right": view = "right_zoom"; break;
      case "zoom_out": view = "both"; break;
      case "open_next":
        $("seed").value = Number($("seed").value) + 1;
        generate();
        break;
      case "save_snapshot": {
        const link = document.createElement("a");
        link.download = `snapshot_${new Date().toISOString()}.png`;
        link.href = canvas.toDataURL("image/png");
        link.click();
        log(`saved snapshot, note: ${a.note}`);
        break;
      }
    }
    log(`action ${a.action}`);
  }
  render();
}

$("voice-form").addEventListener("submit", (ev) => {
  ev.preventDefault();
  const text = $("voice-text").value;
  $("voice-text").value = "";
  applyVoice(voice.step(text, performance.now()));
});

for (const id of ["outliers", "noise"]) {
  const show = () => ($(`${id}-v`).textContent = $(id).value);
  $(id).addEventListener("input", show);
  show();
}
$("generate").addEventListener("click", generate);

await init();
voice = new Voice("activate");
setInterval(() => applyVoice(voice.tick(performance.now())), 250);
generate();
