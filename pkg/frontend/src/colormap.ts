/**
 * Colormaps identical to the server's built-in 256-entry tables.
 * "hot" is exact integer math; "viridis" is the server's table verbatim
 * (embedded so no interpolation rounding can drift).
 */

export type Rgb = [number, number, number];

const VIRIDIS_B64 =
  "RAFURAJVRARXRAVYRQdZRQhaRQlcRQtdRQxeRQ1fRQ9hRhBiRhJjRhNlRhRmRhZnRhdoRhhqRxpr" +
  "RxtsRx1tRx5vRx9wRyFxRyJySCN0SCV1SCZ2SCh4SCl4Ryp5Ryt6Ryx6Ri57Ri97RjB8RTF9RTJ9" +
  "RTR+RDV+RDZ/RDeAQziAQzqBQjuBQjyCQj2DQT6DQUCEQUGEQEKFQEOGQESGP0aHP0eHP0iIPkmJ" +
  "PkqJPUuJPUyJPE6KPE+KPFCKO1GKO1KKOlOKOlSLOVWLOVaLOFeLOFiLN1mMN1qMN1uMNlyMNl2M" +
  "NV6MNWCNNGGNNGKNM2ONM2SNMmWNMmaOMWeOMWiOMWmOMGqOMGuOL2yOL22OL26OLm6OLm+OLnCO" +
  "LXGOLXKOLHOOLHSOLHWOK3aOK3eOKniOKnmOKnmOKXqOKXuOKHyOKH2OKH6OJ3+OJ4COJ4GOJoKO" +
  "JoOOJoSOJYWOJYaNJYeNJYiNJImNJIqNJIuMJIyMI42MI46MI4+MI5CMIpCLIpGLIpKLIpOLIZSL" +
  "IZWLIZaKIZeKIJiKIJmKIJqKIJuJH5yJH52JH56JIJ+IIaCIIqGHIqKHI6OGJKSFJaSFJaWEJqaE" +
  "J6eDKKiDKamCKaqBKquBK6yALKyALK1/La5/Lq9+L7B+MLF9MLJ8MbN8MrN7M7R7M7V6NLZ6Nbd5" +
  "N7h4Obl3O7l2Pbp0P7tzQbxyQ7xxRb1wR75vSb9uS8BtTcBrT8FqUcJpU8NoVcNnV8RmWcVlW8Zk" +
  "XcdiX8dhYMhgYslfZMpeZspdaMtcasxbbM1Zb81Ycc5WdM9Vds9TedBSe9BQftFOgNJNg9JLhdNK" +
  "iNNIitRGjdVFj9VDktZClNZAl9c/mdg9nNg7ntk6odk4o9o3pts1qNszq9wyrdwwsN0vst4ttd4s" +
  "t94sut8rvd8rv98rwuArxOAqx+AqyeEqzOEqz+Ep0eIp1OIp1uIp2eMo3OMo3uMo4eQo4+Qn5uQn" +
  "6OQn6+Un7uUm8OUm8+Ym9eYm+OYl+ucl/ecl";

function decodeB64(s: string): Uint8Array {
  if (typeof Buffer !== "undefined") return new Uint8Array(Buffer.from(s, "base64"));
  const bin = atob(s);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

const VIRIDIS = decodeB64(VIRIDIS_B64);

export function hotEntry(index: number): Rgb {
  const i = Math.max(0, Math.min(255, index));
  return [
    Math.min(3 * i, 255),
    Math.max(0, Math.min(3 * i - 255, 255)),
    Math.max(0, Math.min(3 * i - 510, 255)),
  ];
}

export function viridisEntry(index: number): Rgb {
  const i = Math.max(0, Math.min(255, index));
  return [VIRIDIS[3 * i], VIRIDIS[3 * i + 1], VIRIDIS[3 * i + 2]];
}

/** Round half to even, matching numpy's rint. */
export function rintEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

export function colormapEntry(name: "hot" | "viridis", value: number): Rgb {
  const idx = Math.max(0, Math.min(255, rintEven(value * 255)));
  return name === "hot" ? hotEntry(idx) : viridisEntry(idx);
}
