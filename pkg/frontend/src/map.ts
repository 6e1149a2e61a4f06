// Schematic 2D top-down traffic map: runway polygons plus aircraft glyphs.

import { ConsoleViewState } from "./state.js";
import { ScenarioDoc } from "./types.js";

interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

function headingUnit(headingDeg: number): [number, number] {
  const rad = (headingDeg * Math.PI) / 180;
  return [Math.sin(rad), Math.cos(rad)];
}

export function runwayCorners(rw: ScenarioDoc["geometry"]["runways"][number]): [number, number][] {
  const endToken = rw.id.split("/")[0];
  const heading = parseInt(endToken.slice(0, 2), 10) * 10;
  const [dx, dy] = headingUnit(heading);
  const [nx, ny] = [-dy, dx];
  const half = rw.width_m / 2;
  const [x0, y0] = rw.threshold_lo;
  const x1 = x0 + dx * rw.length_m;
  const y1 = y0 + dy * rw.length_m;
  return [
    [x0 + nx * half, y0 + ny * half],
    [x1 + nx * half, y1 + ny * half],
    [x1 - nx * half, y1 - ny * half],
    [x0 - nx * half, y0 - ny * half],
  ];
}

function fitViewport(
  scenario: ScenarioDoc,
  state: ConsoleViewState,
  width: number,
  height: number
): Viewport {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  const extend = (x: number, y: number) => {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  };
  for (const rw of scenario.geometry.runways) {
    for (const [x, y] of runwayCorners(rw)) extend(x, y);
  }
  for (const entry of Object.values(state.traffic)) {
    extend(entry.track.x, entry.track.y);
  }
  if (!isFinite(minX)) {
    extend(-1000, -1000);
    extend(1000, 1000);
  }
  const pad = 300;
  minX -= pad;
  maxX += pad;
  minY -= pad;
  maxY += pad;
  const scale = Math.min(width / (maxX - minX), height / (maxY - minY));
  return {
    scale,
    offsetX: minX,
    offsetY: minY,
  };
}

function toCanvas(vp: Viewport, height: number, x: number, y: number): [number, number] {
  return [(x - vp.offsetX) * vp.scale, height - (y - vp.offsetY) * vp.scale];
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  scenario: ScenarioDoc,
  state: ConsoleViewState,
  width: number,
  height: number
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10171e";
  ctx.fillRect(0, 0, width, height);
  const vp = fitViewport(scenario, state, width, height);

  for (const rw of scenario.geometry.runways) {
    const corners = runwayCorners(rw).map(([x, y]) => toCanvas(vp, height, x, y));
    ctx.beginPath();
    ctx.moveTo(corners[0][0], corners[0][1]);
    for (const [cx, cy] of corners.slice(1)) ctx.lineTo(cx, cy);
    ctx.closePath();
    ctx.fillStyle = "#3b434c";
    ctx.fill();
    ctx.strokeStyle = "#818b96";
    ctx.stroke();
    const [lx, ly] = toCanvas(vp, height, rw.threshold_lo[0], rw.threshold_lo[1]);
    ctx.fillStyle = "#b8c2cc";
    ctx.font = "11px sans-serif";
    ctx.fillText(rw.id, lx + 4, ly - 4);
  }

  for (const [actorId, entry] of Object.entries(state.traffic)) {
    const { track, trail } = entry;
    ctx.strokeStyle = "rgba(110, 190, 255, 0.45)";
    ctx.beginPath();
    trail.forEach(([x, y], i) => {
      const [cx, cy] = toCanvas(vp, height, x, y);
      if (i === 0) ctx.moveTo(cx, cy);
      else ctx.lineTo(cx, cy);
    });
    ctx.stroke();

    const [cx, cy] = toCanvas(vp, height, track.x, track.y);
    const rad = (track.heading_deg * Math.PI) / 180;
    ctx.save();
    ctx.translate(cx, cy);
    ctx.rotate(rad);
    ctx.beginPath();
    ctx.moveTo(0, -8);
    ctx.lineTo(5, 7);
    ctx.lineTo(-5, 7);
    ctx.closePath();
    ctx.fillStyle = actorId === state.claimedActor ? "#ffd54f" : "#6ebeff";
    ctx.fill();
    ctx.restore();
    ctx.fillStyle = "#d7e1ea";
    ctx.font = "11px monospace";
    const label = track.callsign ?? actorId;
    ctx.fillText(`${label} ${Math.round(track.z)}m`, cx + 8, cy - 8);
  }
}
